/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Context subgraph of the NWP node nearest the point, scored by `method`
     * (`sa`, `gradcam` or `lrp`), as JSON.
     */
    explain(step: number, lat: number, lon: number, method: string): string;
    /**
     * Row-major `height x width` raster of U, V, T or Q at test step `step`,
     * top row northernmost.
     */
    field(step: number, variable: number, width: number, height: number): Float64Array;
    lat_max(): number;
    lat_min(): number;
    lon_max(): number;
    lon_min(): number;
    /**
     * Generates data and trains the model; takes a moment.
     */
    constructor(seed: number);
    test_steps(): number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_explain: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly demo_field: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly demo_lat_max: (a: number) => number;
    readonly demo_lat_min: (a: number) => number;
    readonly demo_lon_max: (a: number) => number;
    readonly demo_lon_min: (a: number) => number;
    readonly demo_new: (a: number) => [number, number, number];
    readonly demo_test_steps: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
