/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_outcome_free: (a: number, b: number) => void;
export const arppf: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const douglasPeucker: (a: number, b: number, c: number) => [number, number, number];
export const generateDataset: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const outcome_bound: (a: number) => number;
export const outcome_count: (a: number) => number;
export const outcome_distance: (a: number) => number;
export const outcome_fetched: (a: number) => number;
export const outcome_points: (a: number) => [number, number];
export const rppf: (a: number, b: number, c: number, d: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
