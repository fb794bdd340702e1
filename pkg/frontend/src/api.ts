// Thin client over the tuner HTTP API. The fetch function is injected so
// tests can run without a browser or server.

import type { ImageEntry, PageSegmentation, SegParams } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  status: number;
  fieldErrors: Record<string, string>;

  constructor(status: number, fieldErrors: Record<string, string> = {}) {
    super(`server responded ${status}`);
    this.status = status;
    this.fieldErrors = fieldErrors;
  }
}

async function fieldErrorsOf(response: Response): Promise<Record<string, string>> {
  try {
    const body = await response.json();
    if (body && typeof body === "object" && body.errors) {
      return body.errors as Record<string, string>;
    }
  } catch {
    // non-JSON error body
  }
  return {};
}

export class TunerApi {
  private fetchFn: FetchLike;
  readonly base: string;

  constructor(fetchFn: FetchLike = (u, i) => fetch(u, i), base = "") {
    this.fetchFn = fetchFn;
    this.base = base;
  }

  async health(): Promise<boolean> {
    const r = await this.fetchFn(`${this.base}/api/health`);
    return r.ok;
  }

  async listImages(): Promise<ImageEntry[]> {
    const r = await this.fetchFn(`${this.base}/api/images`);
    if (!r.ok) throw new ApiError(r.status, await fieldErrorsOf(r));
    return (await r.json()) as ImageEntry[];
  }

  imageUrl(imageId: string): string {
    return `${this.base}/api/image/${encodeURIComponent(imageId)}`;
  }

  async segment(
    imageId: string,
    params: SegParams,
    signal?: AbortSignal,
  ): Promise<PageSegmentation> {
    const r = await this.fetchFn(`${this.base}/api/segment`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ image_id: imageId, params }),
      signal,
    });
    if (!r.ok) throw new ApiError(r.status, await fieldErrorsOf(r));
    const doc = (await r.json()) as PageSegmentation;
    if (!doc || !Array.isArray(doc.blobs) || !Array.isArray(doc.lines)) {
      throw new ApiError(502, { response: "malformed segmentation document" });
    }
    return doc;
  }

  async getParams(): Promise<SegParams> {
    const r = await this.fetchFn(`${this.base}/api/params`);
    if (!r.ok) throw new ApiError(r.status, await fieldErrorsOf(r));
    return (await r.json()) as SegParams;
  }

  async putParams(params: SegParams): Promise<SegParams> {
    const r = await this.fetchFn(`${this.base}/api/params`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(params),
    });
    if (!r.ok) throw new ApiError(r.status, await fieldErrorsOf(r));
    return (await r.json()) as SegParams;
  }
}
