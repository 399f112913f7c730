"""Benchmark data: synthetic regression targets and classification sets.

Dataset files are plain text::

    # d=<d> q=<q> kind=<kind>
    x_1 ... x_d y_1 ... y_q
    ...

with one sample per line and floats written with full round-trip precision.
A dataset is stored as a ``<prefix>.train.txt`` / ``<prefix>.test.txt`` pair.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .network import Topology, network_output

__all__ = [
    "REGRESSION_TARGETS",
    "CLASSIFICATION_SETS",
    "NoiseSpec",
    "Dataset",
    "Schema",
    "target_function",
    "gen_regression",
    "interleave_split",
    "one_hot",
    "parse_schema",
    "load_classification",
    "load_builtin",
    "gen_two_spirals",
    "classification_success",
    "write_dataset",
    "read_dataset",
    "load_dataset",
]

# name -> input dimension
REGRESSION_TARGETS = {"syn5": 1, "sinc": 1, "incsinc": 1, "sinc2d": 2}
CLASSIFICATION_SETS = ("iris", "tic-tac-toe", "balance", "two-spirals")
_BUNDLED = {"iris": "iris", "tic-tac-toe": "tic-tac-toe", "balance": "balance-scale"}
_SMALL_ARG = 1e-8


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 5e-3
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"noise sigma must be non-negative, got {self.sigma}")


@dataclass
class Dataset:
    """Train/test samples with inputs in rows; targets are ``(K, q)``."""

    name: str
    kind: str
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    class_count: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.x_train.shape[1]

    @property
    def q(self) -> int:
        return self.y_train.shape[1]

    @property
    def train(self):
        return self.x_train, self.y_train

    @property
    def test(self):
        return self.x_test, self.y_test


def _sin_ratio(a):
    """``sin(a)/a`` with the removable singularity at 0 taken by its series."""
    a = np.asarray(a, dtype=float)
    small = np.abs(a) < _SMALL_ARG
    safe = np.where(small, 1.0, a)
    return np.where(small, 1.0 - a * a / 6.0, np.sin(safe) / safe)


def target_function(name: str, x):
    """Regression target ``name`` at ``x`` (one point or rows of points)."""
    if name not in REGRESSION_TARGETS:
        raise ValueError(f"unknown target function {name!r}")
    d = REGRESSION_TARGETS[name]
    x = np.asarray(x, dtype=float)
    single = x.ndim == 0 or (x.ndim == 1 and d > 1)
    if x.ndim <= 1 and d == 1:
        pts = x.reshape(-1, 1)
    elif (x.ndim == 1 and x.size == d) or (x.ndim == 2 and x.shape[1] == d):
        pts = x.reshape(-1, d)
    else:
        raise ValueError(f"{name} expects inputs of dimension {d}, got shape {x.shape}")
    if name == "syn5":
        t = pts[:, 0]
        out = (t + 0.5) ** 2 * (0.1 + (t + 0.65) ** 2)
    elif name == "sinc":
        out = _sin_ratio(10.0 * pts[:, 0])
    elif name == "incsinc":
        out = pts[:, 0] / 2.0 + _sin_ratio(10.0 * pts[:, 0])
    else:
        r = np.hypot(pts[:, 0], pts[:, 1])
        # sin(5r)/(15r) = sinc-ratio(5r) / 3
        out = _sin_ratio(5.0 * r) / 3.0
    return float(out[0]) if single else out


def gen_regression(name: str, n_train: int = 200, n_test: int = 200,
                   noise: NoiseSpec = NoiseSpec()) -> Dataset:
    """Uniform inputs on ``[-1, 1]^d`` with Gaussian noise added to the targets."""
    if name not in REGRESSION_TARGETS:
        raise ValueError(f"unknown regression problem {name!r}")
    if n_train < 1 or n_test < 1:
        raise ValueError("sample counts must be positive")
    d = REGRESSION_TARGETS[name]
    rng = np.random.default_rng(noise.seed)
    x = rng.uniform(-1.0, 1.0, size=(n_train + n_test, d))
    y = target_function(name, x) + rng.normal(0.0, 1.0, size=len(x)) * noise.sigma
    y = y[:, None]
    return Dataset(name, "regression", x[:n_train], y[:n_train], x[n_train:], y[n_train:],
                   meta={"sigma": noise.sigma, "seed": noise.seed})


def interleave_split(samples, a: int, b: int):
    """Put ``a`` samples into train, the next ``b`` into test, and repeat.

    Works on lists and arrays (split along the first axis); order is kept
    within each part.
    """
    if a < 1 or b < 1:
        raise ValueError(f"split sizes must be positive, got {a}/{b}")
    pos = np.arange(len(samples))
    is_train = (pos % (a + b)) < a
    if isinstance(samples, np.ndarray):
        return samples[is_train], samples[~is_train]
    return ([s for s, t in zip(samples, is_train) if t],
            [s for s, t in zip(samples, is_train) if not t])


def one_hot(i: int, q: int) -> np.ndarray:
    """Target vector of class ``i`` (1-based) among ``q`` classes."""
    if not 1 <= i <= q:
        raise ValueError(f"class index {i} out of range 1..{q}")
    y = np.zeros(q)
    y[i - 1] = 1.0
    return y


@dataclass
class Schema:
    columns: list[tuple]  # ("numeric",), ("categorical", {value: code}), ("label", [classes]), ("skip",)
    delimiter: str = ","
    split: tuple[int, int] = (1, 1)
    scale: str = "minmax"

    @property
    def classes(self) -> list[str]:
        return next(c[1] for c in self.columns if c[0] == "label")


def parse_schema(text: str) -> Schema:
    """Parse a column schema.

    One directive per line, ``#`` starts a comment::

        delimiter ,
        split 1 1
        scale minmax        # or "none" to keep raw numeric values
        numeric
        categorical x=1 o=-1 b=0
        label classA classB
        skip
    """
    columns, delimiter, split, scale = [], ",", (1, 1), "minmax"
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *args = line.split()
        if key == "delimiter":
            delimiter = args[0] if args else None
            if delimiter in ("space", "whitespace"):
                delimiter = None
        elif key == "split":
            split = (int(args[0]), int(args[1]))
        elif key == "scale":
            if not args or args[0] not in ("minmax", "none"):
                raise ValueError(f"schema line {lineno}: scale must be 'minmax' or 'none'")
            scale = args[0]
        elif key in ("numeric", "skip"):
            columns.append((key,))
        elif key == "categorical":
            mapping = {}
            for arg in args:
                value, _, code = arg.partition("=")
                mapping[value] = float(code)
            columns.append(("categorical", mapping))
        elif key == "label":
            if not args:
                raise ValueError(f"schema line {lineno}: label needs a class list")
            columns.append(("label", list(args)))
        else:
            raise ValueError(f"schema line {lineno}: unknown directive {key!r}")
    if sum(c[0] == "label" for c in columns) != 1:
        raise ValueError("schema must declare exactly one label column")
    return Schema(columns, delimiter, split, scale)


def _scale_columns(x):
    """Affine map of every column onto ``[-1, 1]``; constant columns become 0."""
    lo, hi = x.min(axis=0), x.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return np.where(hi > lo, 2.0 * (x - lo) / span - 1.0, 0.0)


def _parse_rows(lines, schema, source):
    classes = schema.classes
    feats, labels = [], []
    for lineno, raw in lines:
        fields = [f.strip() for f in raw.split(schema.delimiter)]
        if len(fields) != len(schema.columns):
            raise ValueError(f"{source}:{lineno}: expected {len(schema.columns)} fields, "
                             f"got {len(fields)}")
        row = []
        for value, col in zip(fields, schema.columns):
            kind = col[0]
            if kind == "numeric":
                try:
                    row.append(float(value))
                except ValueError:
                    raise ValueError(f"{source}:{lineno}: bad number {value!r}") from None
            elif kind == "categorical":
                if value not in col[1]:
                    raise ValueError(f"{source}:{lineno}: unknown category {value!r}")
                row.append(col[1][value])
            elif kind == "label":
                if value not in classes:
                    raise ValueError(f"{source}:{lineno}: unknown label {value!r}")
                labels.append(classes.index(value) + 1)
        feats.append(row)
    return feats, labels


def load_classification(path, schema, name: str | None = None) -> Dataset:
    """Read a delimited classification file described by ``schema``.

    Numeric columns are scaled to ``[-1, 1]`` over the whole file (unless
    the schema says ``scale none``),
    categorical columns take the codes given in the schema, labels are
    one-hot encoded and the samples are split with the schema's ``a/b`` rule.
    """
    if isinstance(schema, (str, os.PathLike)) and os.path.exists(schema):
        with open(schema) as fh:
            schema = parse_schema(fh.read())
    elif isinstance(schema, str):
        schema = parse_schema(schema)
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such data file: {path}")
    with open(path) as fh:
        lines = [(n, line.rstrip("\n")) for n, line in enumerate(fh, 1) if line.strip()]
    return _build_classification(lines, schema, name or os.path.basename(path), str(path))


def _build_classification(lines, schema, name, source):
    feats, labels = _parse_rows(lines, schema, source)
    if not feats:
        raise ValueError(f"{source}: no samples")
    x = np.array(feats, dtype=float)
    kinds = [c[0] for c in schema.columns if c[0] in ("numeric", "categorical")]
    numeric = [i for i, k in enumerate(kinds) if k == "numeric"]
    if numeric and schema.scale == "minmax":
        x[:, numeric] = _scale_columns(x[:, numeric])
    q = len(schema.classes)
    y = np.array([one_hot(i, q) for i in labels])
    a, b = schema.split
    x_tr, x_te = interleave_split(x, a, b)
    y_tr, y_te = interleave_split(y, a, b)
    return Dataset(name, "classification", x_tr, y_tr, x_te, y_te, class_count=q,
                   meta={"split": f"{a}/{b}", "samples": len(x)})


def gen_two_spirals() -> Dataset:
    """The classic 194-point two-spirals benchmark scaled into ``[-1, 1]^2``.

    Point ``i = 0..96`` has angle ``i pi / 16`` and radius
    ``6.5 (104 - i) / 104``; class 1 is ``(r sin a, r cos a)``, class 2 its
    negation. Samples alternate between the classes and are split 2/2.
    """
    pts, labels = [], []
    for i in range(97):
        phi = i * math.pi / 16.0
        r = 6.5 * (104 - i) / 104.0 / 6.5
        p = (r * math.sin(phi), r * math.cos(phi))
        pts += [p, (-p[0], -p[1])]
        labels += [1, 2]
    x = np.array(pts)
    y = np.array([one_hot(c, 2) for c in labels])
    x_tr, x_te = interleave_split(x, 2, 2)
    y_tr, y_te = interleave_split(y, 2, 2)
    return Dataset("two-spirals", "classification", x_tr, y_tr, x_te, y_te, class_count=2,
                   meta={"split": "2/2", "samples": len(x)})


def load_builtin(name: str) -> Dataset:
    """One of the bundled classification benchmarks."""
    if name == "two-spirals":
        return gen_two_spirals()
    if name not in _BUNDLED:
        raise ValueError(f"unknown classification set {name!r}")
    base = resources.files("desb") / "data"
    stem = _BUNDLED[name]
    schema = parse_schema((base / f"{stem}.schema").read_text())
    text = (base / f"{stem}.data").read_text()
    lines = [(n, line) for n, line in enumerate(text.splitlines(), 1) if line.strip()]
    return _build_classification(lines, schema, name, f"{stem}.data")


def classification_success(topology: Topology, theta, w, x, y) -> float:
    """Percentage of samples whose largest output matches the target class.

    Ties go to the lowest output index.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if len(x) == 0:
        raise ValueError("empty sample set")
    out = np.atleast_2d(network_output(topology, theta, w, x))
    pred = np.argmax(out, axis=1)
    truth = np.argmax(np.asarray(y), axis=1)
    return 100.0 * np.count_nonzero(pred == truth) / len(x)


def _write_part(path, x, y, kind):
    with open(path, "w") as fh:
        fh.write(f"# d={x.shape[1]} q={y.shape[1]} kind={kind}\n")
        for xi, yi in zip(x, y):
            fh.write(" ".join(repr(float(v)) for v in (*xi, *yi)) + "\n")


def write_dataset(dataset: Dataset, prefix) -> tuple[str, str]:
    """Write ``<prefix>.train.txt`` and ``<prefix>.test.txt``; returns both paths."""
    prefix = str(prefix)
    paths = (prefix + ".train.txt", prefix + ".test.txt")
    _write_part(paths[0], dataset.x_train, dataset.y_train, dataset.kind)
    _write_part(paths[1], dataset.x_test, dataset.y_test, dataset.kind)
    return paths


_HEADER = re.compile(r"#\s*d=(\d+)\s+q=(\d+)\s+kind=(\w+)")


def _read_part(path):
    with open(path) as fh:
        header = fh.readline()
        m = _HEADER.match(header)
        if not m:
            raise ValueError(f"{path}:1: missing '# d=<d> q=<q> kind=<kind>' header")
        d, q, kind = int(m.group(1)), int(m.group(2)), m.group(3)
        rows = []
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            vals = line.split()
            if len(vals) != d + q:
                raise ValueError(f"{path}:{lineno}: expected {d + q} values, got {len(vals)}")
            rows.append([float(v) for v in vals])
    data = np.array(rows, dtype=float).reshape(-1, d + q)
    return data[:, :d], data[:, d:], kind


def read_dataset(prefix) -> Dataset:
    """Read a dataset pair written by :func:`write_dataset`.

    ``prefix`` may also name either file of the pair.
    """
    prefix = re.sub(r"\.(train|test)\.txt$", "", str(prefix))
    x_tr, y_tr, kind = _read_part(prefix + ".train.txt")
    x_te, y_te, kind_te = _read_part(prefix + ".test.txt")
    if kind != kind_te or x_tr.shape[1] != x_te.shape[1] or y_tr.shape[1] != y_te.shape[1]:
        raise ValueError(f"train and test files of {prefix} disagree")
    q = y_tr.shape[1]
    return Dataset(os.path.basename(prefix), kind, x_tr, y_tr, x_te, y_te,
                   class_count=q if kind == "classification" else None)


def load_dataset(spec: str, seed: int = 0, sigma: float = 5e-3) -> Dataset:
    """Resolve a dataset by benchmark name or by file prefix."""
    if spec in REGRESSION_TARGETS:
        return gen_regression(spec, noise=NoiseSpec(sigma, seed))
    if spec in CLASSIFICATION_SETS:
        return load_builtin(spec)
    return read_dataset(spec)
