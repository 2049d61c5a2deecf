/* tslint:disable */
/* eslint-disable */

export class ToyModel {
    free(): void;
    [Symbol.dispose](): void;
    final_mmd(): number;
    final_mse(): number;
    inner_radius(): number;
    /**
     * Trains on 300 toy points mapped onto the 2-D target `kind`.
     */
    constructor(kind: string, epochs: number, lambda: number, seed: number);
    projected_points(): Float64Array;
    radius(): number;
    /**
     * Scores on an `nx` by `ny` grid over `[x0, x1] x [y0, y1]`, row by row
     * from `y0`.
     */
    score_field(soft: boolean, x0: number, x1: number, y0: number, y1: number, nx: number, ny: number): Float64Array;
    threshold(soft: boolean): number;
    train_points(): Float64Array;
}

/**
 * `n` points from the 2-D target `kind`, as `[x0, y0, x1, y1, ...]`.
 */
export function sample_target(kind: string, n: number, seed: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_toymodel_free: (a: number, b: number) => void;
    readonly sample_target: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly toymodel_final_mmd: (a: number) => number;
    readonly toymodel_final_mse: (a: number) => number;
    readonly toymodel_inner_radius: (a: number) => number;
    readonly toymodel_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly toymodel_projected_points: (a: number) => [number, number];
    readonly toymodel_radius: (a: number) => number;
    readonly toymodel_score_field: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly toymodel_threshold: (a: number, b: number) => number;
    readonly toymodel_train_points: (a: number) => [number, number];
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
