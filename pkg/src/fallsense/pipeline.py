"""Frame orchestration: ingestion, per-frame processing, sessions, and sweeps.

A session is a directory of `frame_%06d.depth` / `frame_%06d.keypoints.json`
pairs plus `intrinsics.toml` and an optional `labels.csv` with rows
`frame_id,person_index,label` (label is `fallen` or `not_fallen`).
"""

from __future__ import annotations

import json
import logging
import re
import sys
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import depth_io
from .geometry import CameraIntrinsics, DepthFrame, cloud_from_depth, voxel_downsample
from .ground import GroundFilterParams, GroundLabeling, progressive_filter, write_labeling_ply
from .pose import LiftError, PoseDetection2D, average_confidence, lift_pose, parse_poses_json
from .reasoning import Decision, ReasoningConfig, ReasoningReport, classify

log = logging.getLogger(__name__)

Labels = dict[tuple[int, int], bool]


@dataclass(frozen=True)
class FrameBundle:
    """Everything the pipeline needs for one frame."""

    frame_id: int
    timestamp: float
    depth: DepthFrame
    intrinsics: CameraIntrinsics
    poses: tuple[PoseDetection2D, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "poses", tuple(self.poses))
        if self.frame_id < 0:
            raise ValueError(f"frame_id must be >= 0, got {self.frame_id}")


@dataclass(frozen=True)
class NotificationEvent:
    frame_id: int
    timestamp: float
    person_index: int
    report: ReasoningReport

    def to_dict(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "timestamp": self.timestamp,
            "person_index": self.person_index,
            "report": self.report.to_dict(),
        }


@dataclass
class SessionResult:
    """Per-frame reports plus dwell notifications and optional metrics."""

    frames: list[tuple[int, float, list[ReasoningReport]]] = field(default_factory=list)
    notifications: list[NotificationEvent] = field(default_factory=list)
    metrics: dict | None = None

    def to_dict(self) -> dict:
        return {
            "frames": [
                {
                    "frame_id": fid,
                    "timestamp": ts,
                    "reports": [r.to_dict() for r in reports],
                }
                for fid, ts, reports in self.frames
            ],
            "notifications": [n.to_dict() for n in self.notifications],
            "metrics": self.metrics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


# --- notification sinks ---------------------------------------------------------

class FileSink:
    """Appends one JSON line per notification."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def __call__(self, event: NotificationEvent) -> None:
        with open(self.path, "a") as fh:
            fh.write(json.dumps(event.to_dict()) + "\n")


class HttpSink:
    """POSTs each notification as JSON with a short timeout."""

    def __init__(self, url: str, timeout: float = 2.0):
        self.url = url
        self.timeout = timeout

    def __call__(self, event: NotificationEvent) -> None:
        req = urllib.request.Request(
            self.url,
            data=json.dumps(event.to_dict()).encode(),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        urllib.request.urlopen(req, timeout=self.timeout).close()


def _deliver(sink: Callable[[NotificationEvent], None] | None, event: NotificationEvent):
    if sink is None:
        return
    for attempt in (1, 2):  # one retry, then give up without blocking the session
        try:
            sink(event)
            return
        except Exception as exc:
            log.warning("notification sink failed (attempt %d): %s", attempt, exc)


# --- per-frame processing --------------------------------------------------------

def ground_labeling_for(bundle: FrameBundle, gp: GroundFilterParams) -> GroundLabeling:
    """Downsample the frame's cloud and run the ground filter once."""
    cloud = cloud_from_depth(bundle.depth, bundle.intrinsics)
    return progressive_filter(voxel_downsample(cloud, gp.cell_size), gp)


def _classify_pose(
    pose: PoseDetection2D,
    bundle: FrameBundle,
    labeling: GroundLabeling,
    cfg: ReasoningConfig,
) -> ReasoningReport:
    lam = average_confidence(pose, cfg.detection_floor)
    if lam < cfg.lambda_continue:
        return ReasoningReport(lambda_=lam, decision=Decision.INVALID_DETECTION)
    try:
        skeleton = lift_pose(pose, bundle.depth, bundle.intrinsics)
    except LiftError:
        return ReasoningReport(lambda_=lam, decision=Decision.INVALID_DETECTION)
    return classify(skeleton, lam, labeling, cfg)


def process_frame(
    bundle: FrameBundle,
    cfg: ReasoningConfig,
    gp: GroundFilterParams,
    labeling: GroundLabeling | None = None,
) -> list[ReasoningReport]:
    """One report per detected person; a frame without detections reports NoPerson."""
    if labeling is None:
        labeling = ground_labeling_for(bundle, gp)
    if not bundle.poses:
        return [ReasoningReport(lambda_=0.0, decision=Decision.NO_PERSON)]
    return [_classify_pose(pose, bundle, labeling, cfg) for pose in bundle.poses]


def run_session(
    bundles: Iterable[FrameBundle],
    cfg: ReasoningConfig,
    gp: GroundFilterParams,
    sink: Callable[[NotificationEvent], None] | None = None,
    labels: Labels | None = None,
    ground_dump_dir: str | Path | None = None,
) -> SessionResult:
    """Process bundles in order, applying the dwell rule before notifying.

    A notification fires exactly when the same person index has been Fallen
    for `cfg.dwell_frames` consecutive frames; the streak then keeps running
    so one fall yields one notification.
    """
    result = SessionResult()
    streaks: dict[int, int] = {}
    prev_id = None
    for bundle in bundles:
        if prev_id is not None and bundle.frame_id <= prev_id:
            raise ValueError(
                f"frame ids must increase, got {bundle.frame_id} after {prev_id}"
            )
        prev_id = bundle.frame_id

        labeling = ground_labeling_for(bundle, gp)
        if ground_dump_dir is not None:
            out = Path(ground_dump_dir) / f"frame_{bundle.frame_id:06d}.ground.ply"
            write_labeling_ply(out, labeling)
        reports = process_frame(bundle, cfg, gp, labeling=labeling)
        result.frames.append((bundle.frame_id, bundle.timestamp, reports))

        for idx, report in enumerate(reports):
            if report.decision is Decision.FALLEN:
                streaks[idx] = streaks.get(idx, 0) + 1
                if streaks[idx] == cfg.dwell_frames:
                    event = NotificationEvent(bundle.frame_id, bundle.timestamp, idx, report)
                    result.notifications.append(event)
                    _deliver(sink, event)
            else:
                streaks[idx] = 0
        for idx in list(streaks):
            if idx >= len(reports):
                streaks[idx] = 0

    if labels is not None:
        result.metrics = compute_metrics(result, labels)
    return result


def compute_metrics(result: SessionResult, labels: Labels) -> dict:
    """Confusion counts over the labeled (frame, person) pairs."""
    tp = fp = tn = fn = 0
    by_frame = {fid: reports for fid, _ts, reports in result.frames}
    for (fid, pidx), truly_fallen in sorted(labels.items()):
        reports = by_frame.get(fid, [])
        predicted = pidx < len(reports) and reports[pidx].decision is Decision.FALLEN
        if truly_fallen and predicted:
            tp += 1
        elif truly_fallen:
            fn += 1
        elif predicted:
            fp += 1
        else:
            tn += 1
    total = tp + fp + tn + fn
    return {
        "tp": tp,
        "fp": fp,
        "tn": tn,
        "fn": fn,
        "accuracy": (tp + tn) / total if total else None,
        "true_positive_rate": tp / (tp + fn) if (tp + fn) else None,
    }


def threshold_sweep(
    bundles: Sequence[FrameBundle],
    thresholds: Sequence[float],
    cfg: ReasoningConfig,
    gp: GroundFilterParams,
    labels: Labels,
) -> list[tuple[float, float]]:
    """Accuracy of the classifier at each height threshold.

    Ground labelings and lifted skeletons are computed once; each threshold
    only re-derives the decision from the cached distance measures.
    """
    labeled_frames = {fid for fid, _ in labels}
    unlabeled = [b.frame_id for b in bundles if b.frame_id not in labeled_frames]
    if unlabeled:
        raise ValueError(f"corpus frames without labels: {unlabeled[:5]}")

    cached: dict[tuple[int, int], ReasoningReport] = {}
    n_poses: dict[int, int] = {}
    for bundle in bundles:
        labeling = ground_labeling_for(bundle, gp)
        reports = process_frame(bundle, cfg, gp, labeling=labeling)
        n_poses[bundle.frame_id] = len(reports)
        for idx, report in enumerate(reports):
            cached[(bundle.frame_id, idx)] = report

    for fid, pidx in labels:
        if fid not in n_poses:
            raise ValueError(f"label references unknown frame {fid}")

    rows = []
    for t in thresholds:
        hits = 0
        for (fid, pidx), truly_fallen in labels.items():
            report = cached.get((fid, pidx))
            predicted = report is not None and _refallen(report, t)
            if predicted == truly_fallen:
                hits += 1
        rows.append((float(t), hits / len(labels) if labels else 0.0))
    return rows


def _refallen(report: ReasoningReport, threshold: float) -> bool:
    """Re-derive the Fallen decision from stored measures at a new threshold."""
    if report.decision in (Decision.NO_PERSON, Decision.INVALID_DETECTION):
        return False
    if report.inconclusive or report.cog_ground_distance is None:
        return False
    closest = report.cog_ground_distance
    if report.ubc_ground_distance is not None:
        closest = min(closest, report.ubc_ground_distance)
    return closest < threshold


# --- session directory I/O --------------------------------------------------------

_FRAME_RE = re.compile(r"frame_(\d{6})\.depth$")


def save_frame(session_dir: str | Path, bundle: FrameBundle) -> None:
    session_dir = Path(session_dir)
    session_dir.mkdir(parents=True, exist_ok=True)
    depth_io.write_depth_binary(session_dir / f"frame_{bundle.frame_id:06d}.depth", bundle.depth)
    from .pose import poses_to_json  # local import keeps module load light

    (session_dir / f"frame_{bundle.frame_id:06d}.keypoints.json").write_text(
        poses_to_json(bundle.poses)
    )


def load_session(session_dir: str | Path) -> list[FrameBundle]:
    """Read every frame pair in id order; timestamps are the frame ids in seconds."""
    session_dir = Path(session_dir)
    k = depth_io.read_intrinsics(session_dir / "intrinsics.toml")
    bundles = []
    for depth_path in sorted(session_dir.glob("frame_*.depth")):
        m = _FRAME_RE.search(depth_path.name)
        if not m:
            continue
        fid = int(m.group(1))
        kp_path = session_dir / f"frame_{fid:06d}.keypoints.json"
        if not kp_path.exists():
            raise ValueError(f"{kp_path} missing for {depth_path.name}")
        bundles.append(
            FrameBundle(
                frame_id=fid,
                timestamp=float(fid),
                depth=depth_io.read_depth_binary(depth_path),
                intrinsics=k,
                poses=tuple(parse_poses_json(kp_path.read_text())),
            )
        )
    if not bundles:
        raise ValueError(f"no frames found in {session_dir}")
    return bundles


def load_labels(path: str | Path) -> Labels:
    labels: Labels = {}
    lines = Path(path).read_text().strip().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty labels file")
    start = 1 if lines[0].lower().startswith("frame_id") else 0
    for line in lines[start:]:
        if not line.strip():
            continue
        fid, pidx, label = (part.strip() for part in line.split(","))
        if label not in ("fallen", "not_fallen"):
            raise ValueError(f"{path}: bad label {label!r}")
        labels[(int(fid), int(pidx))] = label == "fallen"
    return labels


def save_labels(path: str | Path, labels: Labels) -> None:
    lines = ["frame_id,person_index,label"]
    for (fid, pidx), fallen in sorted(labels.items()):
        lines.append(f"{fid},{pidx},{'fallen' if fallen else 'not_fallen'}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_sweep_csv(path: str | Path, rows: Sequence[tuple[float, float]]) -> None:
    lines = ["threshold_m,accuracy"]
    lines += [f"{t:.6f},{acc:.6f}" for t, acc in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def load_config(path: str | Path) -> tuple[ReasoningConfig, GroundFilterParams]:
    """Flat TOML whose keys mirror the two config dataclasses' field names."""
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    cfg_fields = set(ReasoningConfig.__dataclass_fields__)
    gp_fields = set(GroundFilterParams.__dataclass_fields__)
    unknown = [key for key in doc if key not in cfg_fields | gp_fields]
    if unknown:
        raise ValueError(f"{path}: unknown config keys {unknown}")
    cfg = ReasoningConfig(**{k: v for k, v in doc.items() if k in cfg_fields})
    gp = GroundFilterParams(**{k: v for k, v in doc.items() if k in gp_fields})
    return cfg, gp
