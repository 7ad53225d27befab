export * from "./encoding.js";
export * from "./crypto.js";
export * from "./redactable.js";
export * from "./chunks.js";
export * from "./grid.js";
export * from "./preview.js";
export * from "./tx.js";
export * from "./api.js";
export * from "./console.js";
