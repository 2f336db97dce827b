import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    globalSetup: process.env.CTRLREC_INTEGRATION ? ["tests/service.setup.ts"] : [],
    testTimeout: 120_000,
    hookTimeout: 300_000,
  },
});
