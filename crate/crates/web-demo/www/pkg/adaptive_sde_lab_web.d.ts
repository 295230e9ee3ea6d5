/* tslint:disable */
/* eslint-disable */

/**
 * Mean loss of SignSGD and its SDE on `½(λ₁x₁² + λ₂x₂²)`, plus the closed-form curve.
 */
export function compare_signsgd(l1: number, l2: number, sigma: number, eta: number, steps: number, runs: number, seed: number): string;

/**
 * `E[sign(g + Z)]` for unit-scale Gaussian and Student-t(`ν`) noise on a grid over `[-gmax, gmax]`.
 */
export function sign_drift(nu: number, gmax: number, n: number): string;

/**
 * Stationary covariance diagonal and expected loss of SignSGD and SGD on the same quadratic.
 */
export function stationary(l1: number, l2: number, sigma: number, eta: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly compare_signsgd: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly sign_drift: (a: number, b: number, c: number) => [number, number, number, number];
    readonly stationary: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
