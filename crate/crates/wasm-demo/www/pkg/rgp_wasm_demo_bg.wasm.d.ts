/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_toymodel_free: (a: number, b: number) => void;
export const sample_target: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const toymodel_final_mmd: (a: number) => number;
export const toymodel_final_mse: (a: number) => number;
export const toymodel_inner_radius: (a: number) => number;
export const toymodel_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const toymodel_projected_points: (a: number) => [number, number];
export const toymodel_radius: (a: number) => number;
export const toymodel_score_field: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
export const toymodel_threshold: (a: number, b: number) => number;
export const toymodel_train_points: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
