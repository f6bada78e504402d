import { defineConfig } from "vitest/config";

export default defineConfig({
    test: {
        include: ["tests/**/*.test.ts"],
        testTimeout: 30000,
        hookTimeout: 30000,
        // the e2e suite owns a fixed server port; keep files sequential
        fileParallelism: false,
    },
});
