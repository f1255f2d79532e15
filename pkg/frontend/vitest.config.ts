import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    // The live-service suite boots a portal subprocess in its beforeAll.
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
