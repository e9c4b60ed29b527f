import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    testTimeout: 60_000,
    hookTimeout: 60_000,
    // the board flow is a sequence: load -> what-if -> swap -> approve
    sequence: { concurrent: false },
  },
});
