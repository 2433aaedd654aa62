/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_awaitingConfirmation: (a: number) => number;
export const demo_confirm: (a: number, b: number) => [number, number, number, number];
export const demo_explore: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const demo_ground: (a: number, b: number, c: number) => [number, number];
export const demo_new: () => [number, number, number];
export const demo_point: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const demo_regions: (a: number) => [number, number];
export const demo_reset: (a: number) => void;
export const demo_say: (a: number, b: number, c: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
