"""Blob extraction, text-line grouping and diacritic attachment.

Lines are described by three fitted regression lines (top through blob
bbox tops, bottom through bbox bottoms, middle through centroids) so the
vertical position of characters is known even on skewed lines.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .raster import BinaryImage


@dataclass(frozen=True)
class Blob:
    """One connected foreground component."""

    id: int
    pixels: np.ndarray        # (k, 2) int32 (x, y), raster order
    bbox: tuple[int, int, int, int]   # x0, y0, x1, y1 inclusive
    area: int
    centroid: tuple[float, float]

    def mask(self) -> tuple[np.ndarray, tuple[int, int]]:
        """Local boolean mask plus its (x0, y0) offset in page coordinates."""
        x0, y0, x1, y1 = self.bbox
        m = np.zeros((y1 - y0 + 1, x1 - x0 + 1), dtype=bool)
        m[self.pixels[:, 1] - y0, self.pixels[:, 0] - x0] = True
        return m, (x0, y0)

    def pixel_set(self) -> set[tuple[int, int]]:
        return {(int(x), int(y)) for x, y in self.pixels}


@dataclass(frozen=True)
class Line2D:
    """y = slope * x + intercept, y growing downward."""

    slope: float
    intercept: float

    def __call__(self, x: float) -> float:
        return self.slope * x + self.intercept


@dataclass
class TextLine:
    blob_ids: list[int]
    top: Line2D
    middle: Line2D
    bottom: Line2D
    x_span: tuple[int, int]


@dataclass(frozen=True)
class SegParams:
    connectivity: int = 8
    small_blob_area: int = 6
    line_gap: int = 12
    reading_order: str = "ltr"

    def __post_init__(self):
        errors = validate_seg_params(
            {
                "connectivity": self.connectivity,
                "small_blob_area": self.small_blob_area,
                "line_gap": self.line_gap,
                "reading_order": self.reading_order,
            }
        )
        if errors:
            raise ValueError("; ".join(f"{k}: {v}" for k, v in sorted(errors.items())))

    def to_dict(self) -> dict:
        return {
            "connectivity": self.connectivity,
            "small_blob_area": self.small_blob_area,
            "line_gap": self.line_gap,
            "reading_order": self.reading_order,
        }


def validate_seg_params(doc: dict) -> dict[str, str]:
    """Field-level validation; returns {field: message} for each problem."""
    errors: dict[str, str] = {}
    allowed = {"connectivity", "small_blob_area", "line_gap", "reading_order"}
    for key in doc:
        if key not in allowed:
            errors[key] = "unknown field"
    c = doc.get("connectivity", 8)
    if not isinstance(c, int) or c not in (4, 8):
        errors["connectivity"] = "must be 4 or 8"
    for key in ("small_blob_area", "line_gap"):
        v = doc.get(key, 1)
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            errors[key] = "must be an integer >= 1"
    r = doc.get("reading_order", "ltr")
    if r not in ("ltr", "rtl"):
        errors["reading_order"] = 'must be "ltr" or "rtl"'
    return errors


@dataclass
class PageSegmentation:
    width: int
    height: int
    blobs: list[Blob]
    lines: list[TextLine]
    noise_ids: list[int]
    params: SegParams

    def blob_by_id(self, blob_id: int) -> Blob:
        return self.blobs[blob_id]


# --- connected components ---------------------------------------------------

def extract_blobs(img: BinaryImage, connectivity: int = 8) -> list[Blob]:
    """Run-based two-scan labeling; ids follow raster order of first pixel."""
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    fg = img.foreground
    h, w = fg.shape
    # (y, x0, x1) half-open runs of foreground per row
    runs: list[tuple[int, int, int]] = []
    row_start: list[int] = []
    for y in range(h):
        row_start.append(len(runs))
        row = fg[y]
        if not row.any():
            continue
        padded = np.diff(np.concatenate(([0], row.view(np.int8), [0])))
        starts = np.flatnonzero(padded == 1)
        ends = np.flatnonzero(padded == -1)
        for x0, x1 in zip(starts, ends):
            runs.append((y, int(x0), int(x1)))
    row_start.append(len(runs))

    n = len(runs)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    slack = 1 if connectivity == 8 else 0
    for y in range(1, h):
        a, b = row_start[y], row_start[y + 1]
        pa, pb = row_start[y - 1], row_start[y]
        j = pa
        for i in range(a, b):
            _, x0, x1 = runs[i]
            while j < pb and runs[j][2] + slack <= x0:
                j += 1
            k = j
            while k < pb and runs[k][1] < x1 + slack:
                union(i, k)
                k += 1
            if k > j:
                k -= 1  # last overlapping run may also touch the next run of this row
            j = k

    groups: dict[int, list[int]] = {}
    order: list[int] = []
    for i in range(n):
        r = find(i)
        if r not in groups:
            groups[r] = []
            order.append(r)
        groups[r].append(i)

    blobs: list[Blob] = []
    for blob_id, root in enumerate(order):
        member_runs = groups[root]
        total = sum(runs[i][2] - runs[i][1] for i in member_runs)
        pts = np.empty((total, 2), dtype=np.int32)
        pos = 0
        x0 = y0 = 1 << 30
        x1 = y1 = -1
        for i in sorted(member_runs):
            y, rx0, rx1 = runs[i]
            k = rx1 - rx0
            pts[pos : pos + k, 0] = np.arange(rx0, rx1)
            pts[pos : pos + k, 1] = y
            pos += k
            x0 = min(x0, rx0)
            x1 = max(x1, rx1 - 1)
            y0 = min(y0, y)
            y1 = max(y1, y)
        sx = int(pts[:, 0].sum())
        sy = int(pts[:, 1].sum())
        blobs.append(
            Blob(
                id=blob_id,
                pixels=pts,
                bbox=(int(x0), int(y0), int(x1), int(y1)),
                area=total,
                centroid=(sx / total, sy / total),
            )
        )
    return blobs


# --- line detection ---------------------------------------------------------

def _fit_line(xs: np.ndarray, ys: np.ndarray) -> Line2D:
    if len(xs) < 2 or np.ptp(xs) == 0:
        return Line2D(0.0, float(np.mean(ys)))
    slope, intercept = np.polyfit(xs, ys, 1)
    return Line2D(float(slope), float(intercept))


def detect_lines(blobs: list[Blob], params: SegParams) -> list[TextLine]:
    """Cluster core blobs into lines and fit the three regression lines.

    Core blobs (area >= small_blob_area) are single-link clustered on
    centroid y with gap tolerance line_gap. The top/bottom fits are shifted
    down/up if they would cross the middle fit inside the x span, so
    top <= middle <= bottom holds across the span.
    """
    core = [b for b in blobs if b.area >= params.small_blob_area]
    if not core:
        return []
    core.sort(key=lambda b: b.centroid[1])
    clusters: list[list[Blob]] = [[core[0]]]
    for b in core[1:]:
        if b.centroid[1] - clusters[-1][-1].centroid[1] <= params.line_gap:
            clusters[-1].append(b)
        else:
            clusters.append([b])

    lines = []
    for members in clusters:
        xs = np.array([b.centroid[0] for b in members])
        tops = np.array([b.bbox[1] for b in members], dtype=float)
        bottoms = np.array([b.bbox[3] for b in members], dtype=float)
        mids = np.array([b.centroid[1] for b in members])
        top, middle, bottom = _fit_line(xs, tops), _fit_line(xs, mids), _fit_line(xs, bottoms)
        xmin = min(b.bbox[0] for b in members)
        xmax = max(b.bbox[2] for b in members)
        # linear differences are extremal at the span ends
        over = max(top(xmin) - middle(xmin), top(xmax) - middle(xmax), 0.0)
        if over > 0:
            top = Line2D(top.slope, top.intercept - over)
        under = max(middle(xmin) - bottom(xmin), middle(xmax) - bottom(xmax), 0.0)
        if under > 0:
            bottom = Line2D(bottom.slope, bottom.intercept + under)
        reverse = params.reading_order == "rtl"
        ordered = sorted(members, key=lambda b: b.centroid[0], reverse=reverse)
        lines.append(
            TextLine(
                blob_ids=[b.id for b in ordered],
                top=top,
                middle=middle,
                bottom=bottom,
                x_span=(xmin, xmax),
            )
        )
    lines.sort(key=lambda ln: ln.middle((ln.x_span[0] + ln.x_span[1]) / 2))
    return lines


def attach_diacritics(
    lines: list[TextLine], blobs: list[Blob], params: SegParams
) -> PageSegmentation:
    """Assign small blobs to the nearest line or to noise.

    A small blob joins a line when its centroid is vertically within twice
    the line height of that line's middle fit, measured at the blob's
    centroid x. Equidistant candidates go to the lower line.
    """
    noise: list[int] = []
    width = height = 0
    for b in blobs:
        width = max(width, b.bbox[2] + 1)
        height = max(height, b.bbox[3] + 1)
    attached: dict[int, list[int]] = {i: [] for i in range(len(lines))}
    for b in blobs:
        if b.area >= params.small_blob_area:
            continue
        cx, cy = b.centroid
        best: tuple[float, int] | None = None
        for i, ln in enumerate(lines):
            window = 2.0 * (ln.bottom(cx) - ln.top(cx))
            dist = abs(cy - ln.middle(cx))
            if dist <= window:
                # ties break toward the lower line: prefer larger middle(cx)
                key = (dist, -ln.middle(cx))
                if best is None or key < best[0]:
                    best = (key, i)
        if best is None:
            noise.append(b.id)
        else:
            attached[best[1]].append(b.id)

    out_lines = []
    for i, ln in enumerate(lines):
        ids = list(ln.blob_ids)
        extra = sorted(attached[i], key=lambda bid: blobs[bid].centroid[0],
                       reverse=params.reading_order == "rtl")
        out_lines.append(
            TextLine(
                blob_ids=ids + extra,
                top=ln.top,
                middle=ln.middle,
                bottom=ln.bottom,
                x_span=ln.x_span,
            )
        )
    return PageSegmentation(
        width=width,
        height=height,
        blobs=blobs,
        lines=out_lines,
        noise_ids=noise,
        params=params,
    )


def segment_page(img: BinaryImage, params: SegParams) -> PageSegmentation:
    """extract_blobs + detect_lines + attach_diacritics, page dims retained."""
    blobs = extract_blobs(img, params.connectivity)
    lines = detect_lines(blobs, params)
    seg = attach_diacritics(lines, blobs, params)
    seg.width = img.width
    seg.height = img.height
    return seg


def crop_line(img: BinaryImage, line: TextLine, blobs: list[Blob], margin: int = 0) -> BinaryImage:
    """Crop the union bbox of member blobs (+margin, clamped).

    Only the member blobs' pixels appear in the crop; other ink that
    happens to fall inside the box is excluded.
    """
    members = [blobs[i] for i in line.blob_ids]
    x0 = min(b.bbox[0] for b in members)
    y0 = min(b.bbox[1] for b in members)
    x1 = max(b.bbox[2] for b in members)
    y1 = max(b.bbox[3] for b in members)
    x0 = max(0, x0 - margin)
    y0 = max(0, y0 - margin)
    x1 = min(img.width - 1, x1 + margin)
    y1 = min(img.height - 1, y1 + margin)
    out = np.zeros((y1 - y0 + 1, x1 - x0 + 1), dtype=bool)
    for b in members:
        out[b.pixels[:, 1] - y0, b.pixels[:, 0] - x0] = True
    return BinaryImage(out)


# --- serialization ----------------------------------------------------------

def segmentation_to_dict(seg: PageSegmentation) -> dict:
    return {
        "width": seg.width,
        "height": seg.height,
        "params": seg.params.to_dict(),
        "blobs": [
            {
                "id": b.id,
                "bbox": list(b.bbox),
                "area": b.area,
                "centroid": [b.centroid[0], b.centroid[1]],
            }
            for b in seg.blobs
        ],
        "lines": [
            {
                "blob_ids": ln.blob_ids,
                "top": {"slope": ln.top.slope, "intercept": ln.top.intercept},
                "middle": {"slope": ln.middle.slope, "intercept": ln.middle.intercept},
                "bottom": {"slope": ln.bottom.slope, "intercept": ln.bottom.intercept},
                "x_span": list(ln.x_span),
            }
            for ln in seg.lines
        ],
        "noise_ids": seg.noise_ids,
    }


def segmentation_json(seg: PageSegmentation) -> str:
    return json.dumps(segmentation_to_dict(seg), sort_keys=True, indent=2) + "\n"


# --- overlay rendering ------------------------------------------------------

TOP_COLOR = (40, 90, 255)      # blue
BOTTOM_COLOR = (40, 200, 60)   # green
MIDDLE_COLOR = (230, 40, 40)   # red
BBOX_COLOR = (250, 210, 40)
NOISE_GRAY = 90
INK_GRAY = 255


def render_overlay(img: BinaryImage, seg: PageSegmentation) -> np.ndarray:
    """RGB page view: blob boxes, dimmed noise, and the three fitted lines."""
    rgb = np.zeros((img.height, img.width, 3), dtype=np.uint8)
    rgb[img.foreground] = INK_GRAY
    noise = set(seg.noise_ids)
    for b in seg.blobs:
        if b.id in noise:
            rgb[b.pixels[:, 1], b.pixels[:, 0]] = NOISE_GRAY
    for b in seg.blobs:
        if b.id in noise:
            continue
        x0, y0, x1, y1 = b.bbox
        rgb[y0, x0 : x1 + 1] = BBOX_COLOR
        rgb[y1, x0 : x1 + 1] = BBOX_COLOR
        rgb[y0 : y1 + 1, x0] = BBOX_COLOR
        rgb[y0 : y1 + 1, x1] = BBOX_COLOR
    for ln in seg.lines:
        for fit, color in ((ln.top, TOP_COLOR), (ln.bottom, BOTTOM_COLOR),
                           (ln.middle, MIDDLE_COLOR)):
            _draw_line(rgb, fit, ln.x_span, color)
    return rgb


def _draw_line(rgb: np.ndarray, fit: Line2D, x_span: tuple[int, int], color) -> None:
    h = rgb.shape[0]
    xs = np.arange(x_span[0], x_span[1] + 1)
    ys = np.floor(fit.slope * xs + fit.intercept + 0.5).astype(int)
    keep = (ys >= 0) & (ys < h)
    rgb[ys[keep], xs[keep]] = color
