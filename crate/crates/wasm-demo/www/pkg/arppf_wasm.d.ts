/* tslint:disable */
/* eslint-disable */

export class Outcome {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly bound: number;
    readonly count: number;
    readonly distance: number;
    /**
     * Points read before the final filter (AR-PPF only; the input size otherwise).
     */
    readonly fetched: number;
    /**
     * Kept points, flattened.
     */
    readonly points: Float64Array;
}

export function arppf(points: Float64Array, t_pre: number, passes: number, n_v_pre: number, n_t: number, n_v: number): Outcome;

export function douglasPeucker(points: Float64Array, epsilon: number): Outcome;

/**
 * `kind` is one of linear, periodic_01, periodic_10, uniform, normal.
 */
export function generateDataset(kind: string, n: number, seed: number): Float64Array;

export function rppf(points: Float64Array, n_t: number, n_v: number): Outcome;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_outcome_free: (a: number, b: number) => void;
    readonly arppf: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly douglasPeucker: (a: number, b: number, c: number) => [number, number, number];
    readonly generateDataset: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly outcome_bound: (a: number) => number;
    readonly outcome_count: (a: number) => number;
    readonly outcome_distance: (a: number) => number;
    readonly outcome_fetched: (a: number) => number;
    readonly outcome_points: (a: number) => [number, number];
    readonly rppf: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
