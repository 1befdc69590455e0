/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const __wbg_pixmap_free: (a: number, b: number) => void;
export const demo_ape: (a: number) => [number, number];
export const demo_autofocus: (a: number) => [number, number];
export const demo_azimuth_only: (a: number) => number;
export const demo_defocused: (a: number) => number;
export const demo_field: (a: number) => number;
export const demo_metrics: (a: number) => [number, number];
export const demo_new: (a: number, b: number, c: number) => [number, number, number];
export const demo_refocused: (a: number) => number;
export const demo_spectrum: (a: number, b: number) => [number, number, number];
export const pixmap_height: (a: number) => number;
export const pixmap_rgba: (a: number) => [number, number];
export const pixmap_width: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
