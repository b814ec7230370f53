import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // the end-to-end file boots the real archive service
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
