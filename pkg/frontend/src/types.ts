// Documents exchanged with the segmentation server. These mirror the
// repo's JSON schemas; the UI never derives segmentation client-side.

export interface SegParams {
  connectivity: 4 | 8;
  small_blob_area: number;
  line_gap: number;
  reading_order: "ltr" | "rtl";
}

export interface LineFit {
  slope: number;
  intercept: number;
}

export interface BlobInfo {
  id: number;
  bbox: [number, number, number, number]; // x0, y0, x1, y1 inclusive
  area: number;
  centroid: [number, number];
}

export interface TextLineInfo {
  blob_ids: number[];
  top: LineFit;
  middle: LineFit;
  bottom: LineFit;
  x_span: [number, number];
}

export interface PageSegmentation {
  width: number;
  height: number;
  params: SegParams;
  blobs: BlobInfo[];
  lines: TextLineInfo[];
  noise_ids: number[];
}

export interface ImageEntry {
  id: string;
  width: number;
  height: number;
}

export const DEFAULT_PARAMS: SegParams = {
  connectivity: 8,
  small_blob_area: 6,
  line_gap: 12,
  reading_order: "ltr",
};

export function sameParams(a: SegParams, b: SegParams): boolean {
  return (
    a.connectivity === b.connectivity &&
    a.small_blob_area === b.small_blob_area &&
    a.line_gap === b.line_gap &&
    a.reading_order === b.reading_order
  );
}
