/** Entry point: connect form, then the live chat surface. */

import { ChatClient } from "./client.js";
import { render } from "./view.js";

function start(): void {
  const root = document.getElementById("app");
  if (!root) {
    return;
  }
  const connectButton = document.getElementById("connect") as HTMLButtonElement;
  const nameInput = document.getElementById("name") as HTMLInputElement;
  const endpointInput = document.getElementById("endpoint") as HTMLInputElement;
  const textInput = document.getElementById("text") as HTMLInputElement;
  const sendButton = document.getElementById("send") as HTMLButtonElement;

  let client: ChatClient | null = null;

  connectButton.addEventListener("click", () => {
    const memberName = nameInput.value.trim();
    if (!memberName || client) {
      return;
    }
    client = new ChatClient({
      endpoint: endpointInput.value.trim() || "ws://127.0.0.1:8765/ws",
      memberName,
      onChange: (view) => render(view, root),
      onLog: (message) => console.warn(message),
    });
    client.connect();
    connectButton.disabled = true;
  });

  const submit = () => {
    if (client && client.sendUtterance(textInput.value)) {
      textInput.value = "";
      sendButton.disabled = true;
    }
  };
  sendButton.addEventListener("click", submit);
  textInput.addEventListener("keydown", (event) => {
    if (event.key === "Enter") {
      submit();
    }
  });
  textInput.addEventListener("input", () => {
    sendButton.disabled = !client || textInput.value.trim() === "";
  });

  window.addEventListener("beforeunload", () => client?.leave());
}

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", start);
} else {
  start();
}
