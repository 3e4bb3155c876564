import { defineConfig } from "vitest/config";

export default defineConfig({
  server: {
    proxy: {
      // Dev mode: forward API calls to a locally running `musicsketch serve`.
      "/interpret": "http://127.0.0.1:8000",
      "/sketch": "http://127.0.0.1:8000",
      "/render": "http://127.0.0.1:8000",
      "/sessions": "http://127.0.0.1:8000",
      "/rules": "http://127.0.0.1:8000",
      "/vocabulary": "http://127.0.0.1:8000",
      "/starters": "http://127.0.0.1:8000",
    },
  },
  test: {
    environment: "jsdom",
    include: ["test/**/*.test.ts"],
    testTimeout: 30000,
    hookTimeout: 30000,
  },
});
