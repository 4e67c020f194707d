import json
import os
import numpy as np
from typing import Any, Dict, NamedTuple, Optional
from udakit.errors import ParseError
from udakit.models.bundle import ModelBundle
from udakit.models.layer import LayerSpec
from udakit.ndgraph.tensor import Tensor


"""
模型检查点，保存为.npz文件：各参数张量、动量缓存，以及JSON形式的元数据（网络宽度、随机数状态、步数）。
"""


FORMAT_VERSION = 1


class Checkpoint(NamedTuple):
    bundle: ModelBundle
    buffers: Dict[str, np.ndarray]
    rng_state: Optional[Dict[str, Any]]
    step: int
    epoch: int


def save_checkpoint(path: str, bundle: ModelBundle, buffers: Optional[Dict[str, np.ndarray]] = None, rng_state: Optional[Dict[str, Any]] = None, step: int = 0, epoch: int = 0) -> None:
    """
    保存检查点。
    @params:
        path: str 文件路径
        bundle: ModelBundle 模型参数
        buffers: Dict[str, np.ndarray] 可选，动量缓存
        rng_state: Dict 可选，np.random.Generator的bit_generator.state
        step: int 当前步数
        epoch: int 当前轮数
    """
    meta = {
        "format_version": FORMAT_VERSION,
        "ef": bundle.ef.to_dict(),
        "h": bundle.h.to_dict(),
        "d": bundle.d.to_dict(),
        "names": bundle.names(),
        "rng_state": rng_state,
        "step": int(step),
        "epoch": int(epoch),
    }
    arrays = {"meta": np.array(json.dumps(meta))}
    for name, t in bundle.params.items():
        arrays["param/%s" % (name,)] = t.data
    for name, v in (buffers or {}).items():
        arrays["buffer/%s" % (name,)] = np.asarray(v)
    dirname = os.path.dirname(os.path.abspath(path))
    os.makedirs(dirname, exist_ok = True)
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_checkpoint(path: str) -> Checkpoint:
    """
    读取检查点，参数逐位还原。
    @params:
        path: str 文件路径
    @return:
        ckpt: Checkpoint 检查点内容
    """
    with np.load(path, allow_pickle = False) as data:
        if "meta" not in data.files:
            raise ParseError("'%s' is not a checkpoint: the metadata record is missing." % (path,))
        meta = json.loads(str(data["meta"]))
        version = meta.get("format_version")
        if version != FORMAT_VERSION:
            raise ParseError("Unsupported checkpoint format version %r in '%s'." % (version, path))
        params = {name: Tensor(data["param/%s" % (name,)]) for name in meta["names"]}
        buffers = {k[len("buffer/"):]: np.array(data[k]) for k in data.files if k.startswith("buffer/")}
    bundle = ModelBundle(LayerSpec.from_dict(meta["ef"]), LayerSpec.from_dict(meta["h"]), LayerSpec.from_dict(meta["d"]), params)
    return Checkpoint(bundle, buffers, meta.get("rng_state"), int(meta["step"]), int(meta["epoch"]))
