"""Regression forest predicting viewing rays from local patch descriptors.

Each tree is grown on a bootstrap resample with axis-aligned threshold
splits.  At every node a fixed number of random (feature, threshold)
candidates is scored by the squared-error reduction over the 2-vector
(pan, tilt) targets::

    E = sum |r - mean(node)|^2
        - sum |r - mean(left)|^2 - sum |r - mean(right)|^2

and the gain-maximising candidate is kept.  A node becomes a leaf at the
depth cap, when it holds fewer than ``min_samples`` samples, or when no
candidate achieves positive gain.  Leaves store the mean descriptor, the
mean ray and the sample count of the routed training data.

At query time every tree emits its leaf mean ray together with the squared
descriptor distance to the leaf mean descriptor; predictions farther than
``feature_distance_threshold`` are dropped, which removes descriptors the
forest has never seen (players, noise).  When no explicit threshold is
configured it is calibrated as the 90th percentile of the squared distances
of out-of-bag samples to their leaf means.

Forest files are little-endian binary: an 8-byte magic ``b"PANTILTF"``, a
uint32 format version, a uint32-length-prefixed JSON config block
(descriptor dimension, threshold, tree shape parameters), then per tree the
uint32 node and leaf counts followed by the flat node arrays
(feature int32, threshold float64, left/right/leaf_id int32) and the leaf
arrays (count int64, mean ray float64 (L, 2), mean descriptor float64
(L, D)).  Samples with descriptor value strictly below a node threshold go
left.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, replace

import numpy as np

from .geometry import PtzParams, Ray, pixels_to_rays

MAGIC = b"PANTILTF"
FORMAT_VERSION = 1


class ForestFormatError(ValueError):
    """Raised for malformed, truncated or version-mismatched forest streams."""


@dataclass(frozen=True)
class TrainingSample:
    descriptor: np.ndarray
    ray: Ray

    def __post_init__(self):
        desc = np.asarray(self.descriptor, dtype=float).reshape(-1)
        if not np.all(np.isfinite(desc)):
            raise ValueError("descriptor values must be finite")
        object.__setattr__(self, "descriptor", desc)


@dataclass(frozen=True)
class SplitParam:
    feature_index: int
    threshold: float


@dataclass(frozen=True)
class ForestConfig:
    tree_count: int = 5
    max_depth: int = 20
    min_samples: int = 5
    candidates_per_node: int = 64
    feature_distance_threshold: float | None = None
    threshold_quantile: float = 0.9

    def __post_init__(self):
        if self.tree_count < 1:
            raise ValueError("forest needs at least one tree")
        if self.max_depth < 0 or self.min_samples < 1 or self.candidates_per_node < 1:
            raise ValueError("invalid tree shape parameters")
        if self.feature_distance_threshold is not None and self.feature_distance_threshold <= 0:
            raise ValueError("feature_distance_threshold must be positive")


@dataclass(frozen=True)
class PanTiltTree:
    """Flat-array binary tree; leaf_id indexes the leaf_* arrays."""

    feature: np.ndarray      # int32 (n_nodes,), -1 at leaves
    threshold: np.ndarray    # float64 (n_nodes,)
    left: np.ndarray         # int32 (n_nodes,), -1 at leaves
    right: np.ndarray        # int32 (n_nodes,), -1 at leaves
    leaf_id: np.ndarray      # int32 (n_nodes,), -1 at split nodes
    leaf_count: np.ndarray   # int64 (n_leaves,)
    leaf_ray: np.ndarray     # float64 (n_leaves, 2)
    leaf_descriptor: np.ndarray  # float64 (n_leaves, dim)
    #: bootstrap sample indices this tree was grown on (training metadata,
    #: not serialised; None after deserialisation)
    training_indices: np.ndarray | None = None

    def route(self, descriptor: np.ndarray) -> int:
        """Leaf id reached by a descriptor."""
        node = 0
        while self.feature[node] >= 0:
            if descriptor[self.feature[node]] < self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return int(self.leaf_id[node])

    def depth(self) -> int:
        depths = np.zeros(len(self.feature), dtype=int)
        for node in range(len(self.feature)):
            if self.feature[node] >= 0:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max()) if len(depths) else 0


@dataclass(frozen=True)
class PanTiltForest:
    trees: tuple[PanTiltTree, ...]
    feature_distance_threshold: float
    config: ForestConfig
    descriptor_dim: int

    def __post_init__(self):
        if len(self.trees) < 1:
            raise ValueError("forest needs at least one tree")
        if self.feature_distance_threshold <= 0:
            raise ValueError("feature_distance_threshold must be positive")


def _sse(rays: np.ndarray) -> float:
    if len(rays) == 0:
        return 0.0
    return float(np.sum((rays - rays.mean(axis=0)) ** 2))


def split_gain(rays: np.ndarray, go_left: np.ndarray) -> float:
    """Variance-reduction gain of a boolean partition of the node targets."""
    return _sse(rays) - _sse(rays[go_left]) - _sse(rays[~go_left])


def _grow_tree(descriptors, rays, indices, config, rng):
    feature, threshold, left, right, leaf_id = [], [], [], [], []
    leaf_count, leaf_ray, leaf_desc = [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        leaf_id.append(-1)
        return len(feature) - 1

    def make_leaf(node, idx):
        leaf_id[node] = len(leaf_count)
        leaf_count.append(len(idx))
        leaf_ray.append(rays[idx].mean(axis=0))
        leaf_desc.append(descriptors[idx].mean(axis=0))

    stack = [(new_node(), indices, 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= config.max_depth or len(idx) < config.min_samples:
            make_leaf(node, idx)
            continue
        node_desc = descriptors[idx]
        node_rays = rays[idx]
        n_node = len(idx)

        fis = rng.integers(descriptors.shape[1], size=config.candidates_per_node)
        cols = node_desc[:, fis]
        lo, hi = cols.min(axis=0), cols.max(axis=0)
        thr = lo + (hi - lo) * rng.random(config.candidates_per_node)
        go_left = cols < thr
        left_n = go_left.sum(axis=0)
        usable = (hi > lo) & (left_n > 0) & (left_n < n_node)

        ray_sum = node_rays.sum(axis=0)
        ray_sq = float((node_rays**2).sum())
        sse_parent = ray_sq - float(ray_sum @ ray_sum) / n_node
        left_sum = go_left.T.astype(float) @ node_rays
        left_sq = (go_left.T.astype(float) @ (node_rays**2)).sum(axis=1)
        right_sum = ray_sum - left_sum
        right_sq = ray_sq - left_sq
        safe_left = np.maximum(left_n, 1)
        safe_right = np.maximum(n_node - left_n, 1)
        sse_left = left_sq - (left_sum**2).sum(axis=1) / safe_left
        sse_right = right_sq - (right_sum**2).sum(axis=1) / safe_right
        gains = np.where(usable, sse_parent - sse_left - sse_right, -np.inf)

        best = int(np.argmax(gains))
        # floating-point floor: identical targets must yield a leaf
        gain_min = max(1e-12 * abs(sse_parent), 1e-20)
        if not usable[best] or gains[best] <= gain_min:
            make_leaf(node, idx)
            continue
        feature[node] = int(fis[best])
        threshold[node] = float(thr[best])
        left[node] = new_node()
        right[node] = new_node()
        mask = go_left[:, best]
        stack.append((left[node], idx[mask], depth + 1))
        stack.append((right[node], idx[~mask], depth + 1))

    dim = descriptors.shape[1]
    return PanTiltTree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        leaf_id=np.asarray(leaf_id, dtype=np.int32),
        leaf_count=np.asarray(leaf_count, dtype=np.int64),
        leaf_ray=np.asarray(leaf_ray, dtype=np.float64).reshape(-1, 2),
        leaf_descriptor=np.asarray(leaf_desc, dtype=np.float64).reshape(-1, dim),
        training_indices=indices.copy(),
    )


def train_forest(
    samples: list[TrainingSample], config: ForestConfig = ForestConfig(), seed: int = 0
) -> PanTiltForest:
    """Train a forest on descriptor/ray pairs; fixed seed gives a bit-identical forest.

    Each tree sees an independent bootstrap resample; the gating threshold is
    calibrated from the out-of-bag samples unless the config fixes it.
    """
    if len(samples) < config.min_samples:
        raise ValueError(
            f"need at least {config.min_samples} training samples, got {len(samples)}"
        )
    dims = {len(s.descriptor) for s in samples}
    if len(dims) != 1:
        raise ValueError(f"inconsistent descriptor dimensions: {sorted(dims)}")
    descriptors = np.array([s.descriptor for s in samples])
    rays = np.array([[s.ray.pan_deg, s.ray.tilt_deg] for s in samples])
    n = len(samples)

    trees = []
    heldout_dist = []
    for t in range(config.tree_count):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, t])))
        boot = rng.integers(n, size=n)  # bootstrap with replacement
        tree = _grow_tree(descriptors, rays, boot, config, rng)
        trees.append(tree)
        oob = np.setdiff1d(np.arange(n), boot)
        for i in oob:
            leaf = tree.route(descriptors[i])
            diff = tree.leaf_descriptor[leaf] - descriptors[i]
            heldout_dist.append(float(diff @ diff))

    if config.feature_distance_threshold is not None:
        threshold = config.feature_distance_threshold
    else:
        if not heldout_dist:  # tiny datasets may have no out-of-bag samples
            for tree in trees:
                for i in range(n):
                    leaf = tree.route(descriptors[i])
                    diff = tree.leaf_descriptor[leaf] - descriptors[i]
                    heldout_dist.append(float(diff @ diff))
        threshold = float(np.quantile(heldout_dist, config.threshold_quantile))
        threshold = max(threshold, 1e-12)
    return PanTiltForest(
        trees=tuple(trees),
        feature_distance_threshold=threshold,
        config=config,
        descriptor_dim=descriptors.shape[1],
    )


def predict_ray(
    forest: PanTiltForest, descriptor: np.ndarray, gated: bool = True
) -> list[tuple[Ray, float]]:
    """Per-tree (ray, squared feature distance) predictions, outliers removed.

    One prediction per tree whose leaf mean descriptor lies within the
    feature-distance threshold; ``gated=False`` disables the threshold.
    The list may be empty.
    """
    descriptor = np.asarray(descriptor, dtype=float).reshape(-1)
    if len(descriptor) != forest.descriptor_dim:
        raise ValueError(
            f"descriptor dimension {len(descriptor)} != forest dimension {forest.descriptor_dim}"
        )
    out = []
    for tree in forest.trees:
        leaf = tree.route(descriptor)
        diff = tree.leaf_descriptor[leaf] - descriptor
        dist = float(diff @ diff)
        if gated and dist > forest.feature_distance_threshold:
            continue
        pan, tilt = tree.leaf_ray[leaf]
        out.append((Ray(float(pan), float(tilt)), dist))
    return out


def label_keypoints(
    ptz: PtzParams,
    principal_point: np.ndarray,
    keypoints: list[tuple[np.ndarray, np.ndarray]],
) -> list[TrainingSample]:
    """Turn (pixel, descriptor) keypoints of a calibrated image into samples."""
    if not keypoints:
        return []
    pixels = np.array([np.asarray(px, dtype=float).reshape(2) for px, _ in keypoints])
    pans, tilts = pixels_to_rays(ptz, principal_point, pixels)
    return [
        TrainingSample(descriptor=desc, ray=Ray(float(pan), float(tilt)))
        for (_, desc), pan, tilt in zip(keypoints, pans, tilts)
    ]


def with_threshold(forest: PanTiltForest, threshold: float) -> PanTiltForest:
    """Copy of the forest with a different gating threshold."""
    return PanTiltForest(
        trees=forest.trees,
        feature_distance_threshold=threshold,
        config=replace(forest.config, feature_distance_threshold=threshold),
        descriptor_dim=forest.descriptor_dim,
    )


def _write_array(out: io.BytesIO, arr: np.ndarray, dtype: str) -> None:
    out.write(np.ascontiguousarray(arr, dtype=np.dtype(dtype).newbyteorder("<")).tobytes())


def serialize_forest(forest: PanTiltForest) -> bytes:
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<I", FORMAT_VERSION))
    header = {
        "descriptor_dim": forest.descriptor_dim,
        "feature_distance_threshold": forest.feature_distance_threshold,
        "tree_count": forest.config.tree_count,
        "max_depth": forest.config.max_depth,
        "min_samples": forest.config.min_samples,
        "candidates_per_node": forest.config.candidates_per_node,
        "threshold_quantile": forest.config.threshold_quantile,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    out.write(struct.pack("<I", len(blob)))
    out.write(blob)
    for tree in forest.trees:
        out.write(struct.pack("<II", len(tree.feature), len(tree.leaf_count)))
        _write_array(out, tree.feature, "i4")
        _write_array(out, tree.threshold, "f8")
        _write_array(out, tree.left, "i4")
        _write_array(out, tree.right, "i4")
        _write_array(out, tree.leaf_id, "i4")
        _write_array(out, tree.leaf_count, "i8")
        _write_array(out, tree.leaf_ray, "f8")
        _write_array(out, tree.leaf_descriptor, "f8")
    return out.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ForestFormatError("truncated forest stream")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def array(self, dtype: str, count: int) -> np.ndarray:
        dt = np.dtype(dtype).newbyteorder("<")
        return np.frombuffer(self.take(dt.itemsize * count), dtype=dt).astype(dtype)


def deserialize_forest(data: bytes) -> PanTiltForest:
    reader = _Reader(data)
    if reader.take(len(MAGIC)) != MAGIC:
        raise ForestFormatError("bad magic header; not a forest file")
    (version,) = struct.unpack("<I", reader.take(4))
    if version != FORMAT_VERSION:
        raise ForestFormatError(f"unsupported forest format version {version}")
    (blob_len,) = struct.unpack("<I", reader.take(4))
    try:
        header = json.loads(reader.take(blob_len).decode("utf-8"))
        dim = int(header["descriptor_dim"])
        threshold = float(header["feature_distance_threshold"])
        config = ForestConfig(
            tree_count=int(header["tree_count"]),
            max_depth=int(header["max_depth"]),
            min_samples=int(header["min_samples"]),
            candidates_per_node=int(header["candidates_per_node"]),
            feature_distance_threshold=threshold,
            threshold_quantile=float(header["threshold_quantile"]),
        )
    except (ValueError, KeyError, TypeError) as exc:
        raise ForestFormatError(f"malformed forest header: {exc!r}") from exc
    trees = []
    for _ in range(config.tree_count):
        n_nodes, n_leaves = struct.unpack("<II", reader.take(8))
        trees.append(
            PanTiltTree(
                feature=reader.array("i4", n_nodes),
                threshold=reader.array("f8", n_nodes),
                left=reader.array("i4", n_nodes),
                right=reader.array("i4", n_nodes),
                leaf_id=reader.array("i4", n_nodes),
                leaf_count=reader.array("i8", n_leaves),
                leaf_ray=reader.array("f8", 2 * n_leaves).reshape(n_leaves, 2),
                leaf_descriptor=reader.array("f8", dim * n_leaves).reshape(n_leaves, dim),
            )
        )
    if reader.pos != len(data):
        raise ForestFormatError("trailing bytes after forest payload")
    return PanTiltForest(
        trees=tuple(trees),
        feature_distance_threshold=threshold,
        config=config,
        descriptor_dim=dim,
    )


def save_forest(forest: PanTiltForest, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_forest(forest))


def load_forest(path) -> PanTiltForest:
    with open(path, "rb") as fh:
        return deserialize_forest(fh.read())
