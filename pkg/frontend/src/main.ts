import { ApiClient } from "./api";
import { QueueApp } from "./app";

function playViaAudioElement(url: string): Promise<void> {
  const audio = new Audio(url);
  return audio.play();
}

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}

const app = new QueueApp({
  api: new ApiClient((input, init) => fetch(input, init)),
  root,
  playAudio: playViaAudioElement,
});

window.addEventListener("keydown", (ev) => app.handleKey(ev));
void app.refresh();
