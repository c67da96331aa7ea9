/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_explain: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const demo_field: (a: number, b: number, c: number, d: number, e: number) => [number, number];
export const demo_lat_max: (a: number) => number;
export const demo_lat_min: (a: number) => number;
export const demo_lon_max: (a: number) => number;
export const demo_lon_min: (a: number) => number;
export const demo_new: (a: number) => [number, number, number];
export const demo_test_steps: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
