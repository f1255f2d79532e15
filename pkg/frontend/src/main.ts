import { ApiClient } from "./api";
import { App } from "./app";

const host = document.getElementById("app");
if (host) {
  new App(new ApiClient(), host).start();
}
