"""Registration orchestration: detect, match, fit, warp, evaluate, report."""

from __future__ import annotations

import enum
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.ndimage import correlate1d

from .descmatch import (
    DescriptorPool,
    Modality,
    build_intfeat_pools,
    match_bruteforce,
    match_knn2,
    padded_pca_basis,
    ratio_test_filter,
)
from .errors import EvaluationSkipped, NoConsensus
from .features import OrbConfig, SiftConfig, detect_orb, detect_sift
from .imgcore import Image, InterpMethod, upscale
from .metrics import (
    SSIM_WINDOW,
    Scale,
    SsimMode,
    SsimParams,
    mse as mse_metric,
    psnr as psnr_metric,
    ssim as ssim_metric,
)
from .metrics import _ssim_formula, _windowed_stats
from .registration import Correspondence, RansacConfig, ransac_homography, warp_perspective


class Method(enum.Enum):
    SIFT = "SIFT"
    ORB = "ORB"
    INTFEAT = "INTFEAT"


class Status(enum.Enum):
    OK = "OK"
    TOO_FEW_FEATURES = "TOO_FEW_FEATURES"
    NO_CONSENSUS = "NO_CONSENSUS"
    DEGENERATE = "DEGENERATE"


DEFAULT_SEED = 42
RATIO_DEFAULT = 0.75


@dataclass(frozen=True)
class PipelineConfig:
    sift: SiftConfig = SiftConfig()
    orb: OrbConfig = OrbConfig()
    ransac: RansacConfig = RansacConfig(seed=DEFAULT_SEED)
    ratio: float = RATIO_DEFAULT
    seed: int = DEFAULT_SEED

    def with_seed(self, seed: int) -> "PipelineConfig":
        return replace(self, seed=seed, ransac=replace(self.ransac, seed=seed))

    def echo(self) -> dict:
        return {
            "sift": asdict(self.sift),
            "orb": asdict(self.orb),
            "ransac": asdict(self.ransac),
            "ratio": self.ratio,
        }


@dataclass
class RegistrationReport:
    method: str
    interp: Optional[str]
    keypoints_1: int
    keypoints_2: int
    matches: int
    inliers: int
    homography: Optional[list]
    ssim: Optional[float]
    psnr_db: Optional[float]
    mse: Optional[float]
    status: str
    seed: int
    pca_padded: bool = False
    config: dict = field(default_factory=dict)
    runtime_ms: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.inliers > self.matches:
            raise ValueError("inliers cannot exceed matches")
        if min(self.keypoints_1, self.keypoints_2, self.matches, self.inliers) < 0:
            raise ValueError("counts must be nonnegative")
        if self.status == Status.OK.value:
            if self.homography is None or self.ssim is None:
                raise ValueError("OK reports must carry a homography and metrics")

    def to_json_dict(self, include_timings: bool = False) -> dict:
        psnr_out = self.psnr_db
        if psnr_out is not None and math.isinf(psnr_out):
            psnr_out = "inf"
        out = {
            "schema": 1,
            "method": self.method,
            "interp": self.interp,
            "keypoints_1": self.keypoints_1,
            "keypoints_2": self.keypoints_2,
            "matches": self.matches,
            "inliers": self.inliers,
            "homography": self.homography,
            "ssim": self.ssim,
            "psnr_db": psnr_out,
            "mse": self.mse,
            "status": self.status,
            "seed": self.seed,
            "pca_padded": self.pca_padded,
            "config": self.config,
        }
        # timings vary run to run, so they are opt-in to keep reports
        # byte-reproducible
        if include_timings:
            out["runtime_ms"] = self.runtime_ms
        return out

    def to_json(self, include_timings: bool = False) -> str:
        return json.dumps(self.to_json_dict(include_timings), indent=2, sort_keys=True) + "\n"


def evaluate(registered: Image, reference: Image, mask: np.ndarray):
    """(ssim, psnr_db, mse) over the valid region only.

    MSE/PSNR use the 8-bit scale over valid pixels; SSIM averages 11x11
    windows lying fully inside the mask. Raises EvaluationSkipped when
    nothing can be measured.
    """
    if registered.shape != reference.shape:
        raise ValueError("registered and reference dimensions differ")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != registered.shape:
        raise ValueError("mask dimensions differ from the images")
    if not mask.any():
        raise EvaluationSkipped("validity mask is empty")

    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    y0, y1 = rows[0], rows[-1] + 1
    x0, x1 = cols[0], cols[-1] + 1
    reg = registered.data[y0:y1, x0:x1]
    ref = reference.data[y0:y1, x0:x1]
    sub = mask[y0:y1, x0:x1]

    reg8 = np.floor(reg * 255.0 + 0.5)
    ref8 = np.floor(ref * 255.0 + 0.5)
    diff = (reg8 - ref8)[sub]
    mse_val = float(np.mean(diff * diff))
    psnr_val = math.inf if mse_val == 0.0 else 10.0 * math.log10(65025.0 / mse_val)

    if min(sub.shape) < SSIM_WINDOW:
        raise EvaluationSkipped("valid region smaller than the SSIM window")
    taps = np.ones(SSIM_WINDOW)
    counts = correlate1d(sub.astype(np.float64), taps, axis=0, mode="constant")
    counts = correlate1d(counts, taps, axis=1, mode="constant")
    half = SSIM_WINDOW // 2
    full = counts[half:-half, half:-half] > SSIM_WINDOW * SSIM_WINDOW - 0.5
    if not full.any():
        raise EvaluationSkipped("no SSIM window fits inside the mask")
    params = SsimParams(L=255.0, mode=SsimMode.WINDOWED)
    stats = _windowed_stats(reg8, ref8)
    ssim_map = _ssim_formula(*stats, params.c1, params.c2)
    ssim_val = float(np.mean(ssim_map[full]))
    return ssim_val, psnr_val, mse_val


def _detect(img: Image, method: Method, cfg: PipelineConfig):
    """(keypoints, sift_descs, orb_descs) as the method requires."""
    sift_kps, sift_descs = ([], [])
    orb_kps, orb_descs = ([], [])
    if method in (Method.SIFT, Method.INTFEAT):
        sift_kps, sift_descs = detect_sift(img, cfg.sift)
    if method in (Method.ORB, Method.INTFEAT):
        orb_kps, orb_descs = detect_orb(img, cfg.orb)
    return sift_kps, sift_descs, orb_kps, orb_descs


def _float_matches(desc1, desc2, kps1, kps2, ratio):
    if not len(desc1) or not len(desc2):
        return []
    pool1 = DescriptorPool(Modality.FLOAT32DIM, np.asarray(desc1, dtype=np.float64))
    pool2 = DescriptorPool(Modality.FLOAT32DIM, np.asarray(desc2, dtype=np.float64))
    kept = ratio_test_filter(match_knn2(pool1, pool2), ratio)
    return [(kps1[m.query_index], kps2[m.train_index]) for m in kept]


def _binary_matches(desc1, desc2, kps1, kps2):
    if not len(desc1) or not len(desc2):
        return []
    pool1 = DescriptorPool(Modality.BINARY256, np.asarray(desc1, dtype=np.uint8))
    pool2 = DescriptorPool(Modality.BINARY256, np.asarray(desc2, dtype=np.uint8))
    kept = match_bruteforce(pool1, pool2, cross_check=True)
    return [(kps1[m.query_index], kps2[m.train_index]) for m in kept]


def register(img1: Image, img2: Image, method: Method, cfg: PipelineConfig = PipelineConfig()):
    """Warp img1 into img2's frame; returns (registered or None, report).

    INTFEAT reduces SIFT descriptors with a per-pair PCA basis, matches
    each modality separately, and feeds the pooled matches to RANSAC.
    """
    timings = {}
    t0 = time.perf_counter()
    s1_kps, s1_desc, o1_kps, o1_desc = _detect(img1, method, cfg)
    s2_kps, s2_desc, o2_kps, o2_desc = _detect(img2, method, cfg)
    timings["detect"] = (time.perf_counter() - t0) * 1000.0

    pca_padded = False
    t0 = time.perf_counter()
    if method is Method.SIFT:
        n1, n2 = len(s1_kps), len(s2_kps)
        pairs = _float_matches(s1_desc, s2_desc, s1_kps, s2_kps, cfg.ratio)
    elif method is Method.ORB:
        n1, n2 = len(o1_kps), len(o2_kps)
        pairs = _binary_matches(o1_desc, o2_desc, o1_kps, o2_kps)
    else:
        n1 = len(s1_kps) + len(o1_kps)
        n2 = len(s2_kps) + len(o2_kps)
        all_sift = [d for d in s1_desc] + [d for d in s2_desc]
        pairs = []
        if all_sift:
            basis, pca_padded = padded_pca_basis(np.asarray(all_sift))
            kps1, fpool1, bpool1 = build_intfeat_pools(s1_kps, s1_desc, o1_kps, o1_desc, basis)
            kps2, fpool2, bpool2 = build_intfeat_pools(s2_kps, s2_desc, o2_kps, o2_desc, basis)
            kept = ratio_test_filter(match_knn2(fpool1, fpool2), cfg.ratio) if len(fpool1) and len(fpool2) else []
            pairs += [
                (kps1[fpool1.keypoint_refs[m.query_index]], kps2[fpool2.keypoint_refs[m.train_index]])
                for m in kept
            ]
            kept = match_bruteforce(bpool1, bpool2, cross_check=True) if len(bpool1) and len(bpool2) else []
            pairs += [
                (kps1[bpool1.keypoint_refs[m.query_index]], kps2[bpool2.keypoint_refs[m.train_index]])
                for m in kept
            ]
        else:
            pairs = _binary_matches(o1_desc, o2_desc, o1_kps, o2_kps)
    timings["match"] = (time.perf_counter() - t0) * 1000.0

    def report(status, inliers=0, homography=None, metrics=(None, None, None)):
        return RegistrationReport(
            method=method.value,
            interp=None,
            keypoints_1=n1,
            keypoints_2=n2,
            matches=len(pairs),
            inliers=inliers,
            homography=homography,
            ssim=metrics[0],
            psnr_db=metrics[1],
            mse=metrics[2],
            status=status.value,
            seed=cfg.seed,
            pca_padded=pca_padded,
            config=cfg.echo(),
            runtime_ms=dict(timings),
        )

    if len(pairs) < 4:
        return None, report(Status.TOO_FEW_FEATURES)

    corrs = [Correspondence((a.x, a.y), (b.x, b.y)) for a, b in pairs]
    t0 = time.perf_counter()
    try:
        homography, inlier_mask = ransac_homography(corrs, cfg.ransac)
    except NoConsensus:
        timings["ransac"] = (time.perf_counter() - t0) * 1000.0
        return None, report(Status.NO_CONSENSUS)
    timings["ransac"] = (time.perf_counter() - t0) * 1000.0
    inliers = int(inlier_mask.sum())

    t0 = time.perf_counter()
    registered, mask = warp_perspective(img1, homography, (img2.width, img2.height))
    timings["warp"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    try:
        metrics = evaluate(registered, img2, mask)
    except EvaluationSkipped:
        timings["evaluate"] = (time.perf_counter() - t0) * 1000.0
        return None, report(Status.DEGENERATE, inliers, homography.as_flat_list())
    timings["evaluate"] = (time.perf_counter() - t0) * 1000.0
    return registered, report(Status.OK, inliers, homography.as_flat_list(), metrics)


def upscale_register_evaluate(
    lowres: Image,
    highres: Image,
    method: Method,
    interp: InterpMethod,
    cfg: PipelineConfig = PipelineConfig(),
):
    """Upscale the low-resolution member, register, and report with interp."""
    factor = highres.width / lowres.width
    upscaled = upscale(lowres, factor, interp)
    registered, rep = register(upscaled, highres, method, cfg)
    rep.interp = interp.value
    return registered, rep


def metrics_only(a: Image, b: Image, scale: Scale = Scale.EIGHTBIT, mode: SsimMode = SsimMode.WINDOWED):
    """Plain whole-image metric triple used by the metrics subcommand."""
    params = SsimParams(L=255.0 if scale is Scale.EIGHTBIT else 1.0, mode=mode)
    return (
        ssim_metric(a, b, params),
        psnr_metric(a, b, scale),
        mse_metric(a, b, scale),
    )
