"""Python interface to the evdetect C++ core.

Array arguments are numpy arrays (float64, one row per point). Clustering and
validation calls return plain dicts mirroring the JSON artifacts.
"""
import json as _json

from . import _evdetect as _core
from ._evdetect import (  # noqa: F401
    ConfigError,
    Error,
    NumericalError,
    ParseError,
    PreconditionError,
    calinski_harabasz,
    derive_seed,
    pca,
    preprocess,
    silhouette,
    split_partitions,
    tfidf,
    umap,
)

__all__ = [
    "Error", "ConfigError", "ParseError", "PreconditionError", "NumericalError",
    "derive_seed", "preprocess", "tfidf", "pca", "umap",
    "kmeans", "pam", "agglomerative", "gmm", "hdbscan", "elbow",
    "csai", "silhouette", "calinski_harabasz", "split_partitions",
    "run_pipeline", "compare",
]


def _wrap(fn):
    def call(*args, **kwargs):
        return _json.loads(fn(*args, **kwargs))

    call.__name__ = fn.__name__
    call.__doc__ = fn.__doc__
    return call


kmeans = _wrap(_core.kmeans)
pam = _wrap(_core.pam)
agglomerative = _wrap(_core.agglomerative)
gmm = _wrap(_core.gmm)
hdbscan = _wrap(_core.hdbscan)
elbow = _wrap(_core.elbow)
csai = _wrap(_core.csai)
run_pipeline = _wrap(_core.run_pipeline)
compare = _wrap(_core.compare)
