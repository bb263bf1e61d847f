"""Dataset tables, synthetic generation, group-conditional label flipping.

A table is column-oriented (numpy arrays) but exposes row-level Example
records where convenient. z == -1 marks an unknown clean label.
Interchange format is CSV with header ``id,s,z,y,f0,...,f{d-1}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import InputError

NO_CLEAN_LABEL = -1


class ParseError(ValueError):
    pass


class DegenerateGroupError(ValueError):
    """A group required by the computation has no members."""


@dataclass(frozen=True)
class Example:
    id: int
    features: np.ndarray
    y_observed: int
    z_clean: int  # NO_CLEAN_LABEL when unknown
    s: int

    @property
    def has_clean_label(self) -> bool:
        return self.z_clean != NO_CLEAN_LABEL


@dataclass
class DatasetTable:
    ids: np.ndarray        # (n,) int64
    features: np.ndarray   # (n, d) float64
    y: np.ndarray          # (n,) observed labels
    z: np.ndarray          # (n,) clean labels, NO_CLEAN_LABEL where unknown
    s: np.ndarray          # (n,) group ids
    split: str = "train"

    def __post_init__(self):
        n = len(self.ids)
        if not (len(self.y) == len(self.z) == len(self.s) == n
                and self.features.shape[0] == n):
            raise InputError("column lengths disagree")
        if len(np.unique(self.ids)) != n:
            raise InputError("duplicate ids in table")

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.y.max()) + 1 if len(self) else 0

    @property
    def has_clean_labels(self) -> bool:
        return len(self) > 0 and bool(np.all(self.z != NO_CLEAN_LABEL))

    def example(self, i: int) -> Example:
        return Example(int(self.ids[i]), self.features[i], int(self.y[i]),
                       int(self.z[i]), int(self.s[i]))

    def examples(self):
        return [self.example(i) for i in range(len(self))]

    def take(self, idx, split: str | None = None) -> "DatasetTable":
        idx = np.asarray(idx)
        return DatasetTable(self.ids[idx].copy(), self.features[idx].copy(),
                            self.y[idx].copy(), self.z[idx].copy(),
                            self.s[idx].copy(), split or self.split)


@dataclass(frozen=True)
class GenSpec:
    num_examples: int
    feature_dim: int
    class_priors: tuple          # length K, sums to 1
    means: tuple                 # K rows of length feature_dim
    variances: tuple             # K rows of length feature_dim (diagonal covs)
    group_prior: tuple           # length |S|, sums to 1


def generate_synthetic(gen: GenSpec, seed: int, split: str = "train") -> DatasetTable:
    """Class-conditional Gaussian features; group drawn independently of class.

    y_observed starts equal to z_clean; bias is injected separately.
    """
    priors = np.asarray(gen.class_priors, dtype=np.float64)
    gprior = np.asarray(gen.group_prior, dtype=np.float64)
    if abs(priors.sum() - 1) > 1e-9 or abs(gprior.sum() - 1) > 1e-9:
        raise InputError("priors must sum to 1")
    if np.any(np.asarray(gen.variances) <= 0):
        raise InputError("variances must be positive")
    rng = np.random.default_rng(seed)
    n, d = gen.num_examples, gen.feature_dim
    z = rng.choice(len(priors), size=n, p=priors)
    s = rng.choice(len(gprior), size=n, p=gprior)
    means = np.asarray(gen.means, dtype=np.float64)
    stds = np.sqrt(np.asarray(gen.variances, dtype=np.float64))
    x = means[z] + rng.standard_normal((n, d)) * stds[z]
    return DatasetTable(np.arange(n, dtype=np.int64), x, z.copy(), z.copy(),
                        s.astype(np.int64), split)


@dataclass(frozen=True)
class BiasSpec:
    """Group-conditional flip rates: theta_plus[s] = P(Y=1|Z=0,S=s), theta_minus[s] = P(Y=0|Z=1,S=s)."""

    theta_plus: tuple
    theta_minus: tuple

    def __post_init__(self):
        for r in (*self.theta_plus, *self.theta_minus):
            if not 0.0 <= r <= 1.0:
                raise InputError("flip rates must be in [0,1]")

    @classmethod
    def symmetric(cls, rho: float, num_groups: int = 2,
                  target_groups=(1,)) -> "BiasSpec":
        """Flip both directions at rate rho within the targeted groups only."""
        tp = [rho if g in target_groups else 0.0 for g in range(num_groups)]
        return cls(tuple(tp), tuple(tp))


def inject_label_bias(table: DatasetTable, bias: BiasSpec, seed: int) -> DatasetTable:
    """Flip y_observed away from z_clean per the group-conditional rates.

    Binary labels only. Features, s, and z_clean are never touched.
    """
    if not table.has_clean_labels:
        raise InputError("inject_label_bias needs z_clean on every example")
    if table.num_classes > 2 or np.any(table.z > 1):
        raise InputError("label bias injection is defined for binary labels")
    if int(table.s.max()) >= len(bias.theta_plus):
        raise InputError("BiasSpec covers fewer groups than the table")
    rng = np.random.default_rng(seed)
    u = rng.random(len(table))
    tp = np.asarray(bias.theta_plus)[table.s]
    tm = np.asarray(bias.theta_minus)[table.s]
    rate = np.where(table.z == 0, tp, tm)
    flip = u < rate
    y = np.where(flip, 1 - table.z, table.z)
    return DatasetTable(table.ids.copy(), table.features.copy(),
                        y.astype(np.int64), table.z.copy(), table.s.copy(),
                        table.split)


@dataclass
class GroupStats:
    group_counts: np.ndarray          # C_s
    joint_counts: np.ndarray          # C_{s,z}, z proxied by y_observed
    p_s: np.ndarray
    p_z: np.ndarray                   # marginal of observed labels
    label_given_group: np.ndarray     # P(Y=j | S=s), rows per group
    present_groups: np.ndarray        # groups with at least one member

    def complement_label_dist(self, s: int) -> np.ndarray:
        """Observed label distribution pooled over every group except s."""
        others = [g for g in self.present_groups if g != s]
        if not others:
            raise DegenerateGroupError(
                f"no complementary group for s={s}; table has one group")
        pooled = self.joint_counts[others].sum(axis=0)
        return pooled / pooled.sum()


def group_statistics(table: DatasetTable, num_groups: int | None = None,
                     num_classes: int | None = None) -> GroupStats:
    if len(table) == 0:
        raise DegenerateGroupError("empty table")
    ng = num_groups or int(table.s.max()) + 1
    nk = num_classes or table.num_classes
    joint = np.zeros((ng, nk))
    np.add.at(joint, (table.s, table.y), 1.0)
    counts = joint.sum(axis=1)
    present = np.flatnonzero(counts > 0)
    label_given_group = np.zeros_like(joint)
    label_given_group[present] = joint[present] / counts[present, None]
    n = float(len(table))
    return GroupStats(
        group_counts=counts, joint_counts=joint,
        p_s=counts / n, p_z=joint.sum(axis=0) / n,
        label_given_group=label_given_group, present_groups=present,
    )


def split_table(table: DatasetTable, fractions: dict, seed: int) -> dict:
    """Seeded shuffle then contiguous slices; fractions must sum to 1."""
    if abs(sum(fractions.values()) - 1) > 1e-9:
        raise InputError("split fractions must sum to 1")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(table))
    out, start = {}, 0
    names = list(fractions)
    for i, name in enumerate(names):
        stop = len(table) if i == len(names) - 1 else start + int(
            round(fractions[name] * len(table)))
        out[name] = table.take(order[start:stop], split=name)
        start = stop
    return out


def _fmt(v: float) -> str:
    return repr(float(v))


def save_table(table: DatasetTable, path) -> None:
    d = table.dim
    header = "id,s,z,y," + ",".join(f"f{i}" for i in range(d))
    lines = [header]
    for i in range(len(table)):
        z = "" if table.z[i] == NO_CLEAN_LABEL else str(int(table.z[i]))
        feats = ",".join(_fmt(v) for v in table.features[i])
        lines.append(f"{int(table.ids[i])},{int(table.s[i])},{z},{int(table.y[i])},{feats}")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def load_table(path, split: str = "train") -> DatasetTable:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise ParseError(f"{path}: empty file")
    header = lines[0].split(",")
    if header[:4] != ["id", "s", "z", "y"]:
        raise ParseError(f"{path}: bad header {lines[0]!r}")
    d = len(header) - 4
    ids, ss, zs, ys, feats = [], [], [], [], []
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != 4 + d:
            raise ParseError(f"{path}:{lineno}: expected {4 + d} fields, got {len(cells)}")
        try:
            i = int(cells[0]); s = int(cells[1])
            z = NO_CLEAN_LABEL if cells[2] == "" else int(cells[2])
            y = int(cells[3])
            row = [float(c) for c in cells[4:]]
        except ValueError as e:
            raise ParseError(f"{path}:{lineno}: {e}") from None
        if i in seen:
            raise ParseError(f"{path}:{lineno}: duplicate id {i}")
        seen.add(i)
        ids.append(i); ss.append(s); zs.append(z); ys.append(y); feats.append(row)
    n = len(ids)
    return DatasetTable(
        np.array(ids, dtype=np.int64),
        np.array(feats, dtype=np.float64).reshape(n, d),
        np.array(ys, dtype=np.int64), np.array(zs, dtype=np.int64),
        np.array(ss, dtype=np.int64), split,
    )
