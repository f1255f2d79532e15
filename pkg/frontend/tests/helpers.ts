import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

export function fixtureText(name: string): string {
  return readFileSync(join(FIXTURES, name), "utf8");
}

export function fixtureJson<T>(name: string): T {
  return JSON.parse(fixtureText(name)) as T;
}

/** The raw token printed for `key` in a JSON text, exactly as serialized.
 *
 * Byte-level comparisons against rendered numbers must not go through
 * JSON.parse, or the test would only prove that two parsers agree.
 */
export function rawJsonToken(text: string, key: string): string {
  const m = new RegExp(`"${key}"\\s*:\\s*([^,}\\]\\s]+)`).exec(text);
  if (!m) throw new Error(`no key ${key} in JSON text`);
  return m[1];
}
