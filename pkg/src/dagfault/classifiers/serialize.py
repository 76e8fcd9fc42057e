"""Binary model files.

Layout::

    b"DFM1" | uint16 version | uint32 header length | JSON header | arrays

The header lists every stored array with its dtype and shape; arrays follow
in header order as ``.npy`` records.
"""

import io
import json
import struct

import numpy as np

from ..dataset import Scaler
from ..exceptions import ModelFormatError
from .model import ModelSpec, TrainedModel, make_estimator

MAGIC = b"DFM1"
VERSION = 1


def dumps(model: TrainedModel) -> bytes:
    arrays = {"scaler.mean": model.scaler.mean_, "scaler.scale": model.scaler.scale_,
              "classes": np.asarray(model.classes)}
    arrays.update({f"est.{k}": np.asarray(v) for k, v in model.estimator._get_arrays().items()})
    header = {
        "format": "DFM1",
        "version": VERSION,
        "spec": model.spec.to_dict(),
        "feature_ids": list(model.feature_ids),
        "estimator_params": {k: _jsonable(v) for k, v in model.estimator.get_params().items()},
        "arrays": [{"name": k, "dtype": str(v.dtype), "shape": list(v.shape)} for k, v in arrays.items()],
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<HI", VERSION, len(head)))
    buf.write(head)
    for v in arrays.values():
        np.lib.format.write_array(buf, np.ascontiguousarray(v), allow_pickle=False)
    return buf.getvalue()


def loads(data: bytes) -> TrainedModel:
    if data[:4] != MAGIC:
        raise ModelFormatError("not a DFM1 model file")
    version, n = struct.unpack("<HI", data[4:10])
    if version != VERSION:
        raise ModelFormatError(f"unsupported model file version {version}")
    header = json.loads(data[10:10 + n].decode("utf-8"))
    buf = io.BytesIO(data[10 + n:])
    arrays = {}
    for entry in header["arrays"]:
        arrays[entry["name"]] = np.lib.format.read_array(buf, allow_pickle=False)
    spec = ModelSpec.from_dict(header["spec"])
    est = make_estimator(spec)
    params = header["estimator_params"]
    if "hidden_layers" in params:
        params["hidden_layers"] = tuple(params["hidden_layers"])
    est.set_params(**params)
    est.classes_ = arrays["classes"]
    est.n_features_in_ = len(arrays["scaler.mean"])
    est._set_arrays({k[4:]: v for k, v in arrays.items() if k.startswith("est.")})
    scaler = Scaler()
    scaler.mean_ = arrays["scaler.mean"]
    scaler.scale_ = arrays["scaler.scale"]
    scaler.n_features_in_ = len(scaler.mean_)
    return TrainedModel(spec, scaler, est, header["feature_ids"])


def save(model: TrainedModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(model))


def load(path) -> TrainedModel:
    with open(path, "rb") as fh:
        return loads(fh.read())


def _jsonable(v):
    if isinstance(v, tuple):
        return list(v)
    if isinstance(v, np.generic):
        return v.item()
    return v
