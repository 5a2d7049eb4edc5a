"""Model checkpoints: a plain-text manifest next to concatenated QVT1
records.

`<prefix>.manifest` holds the architecture header, optional
quanvolution settings, and one line per tensor:

    param <name> <dims-comma-separated> <byte-offset>
    stat  <name> <dims> <byte-offset>

Offsets point into `<prefix>.tensors`.  When the model was trained on
quanvoluted input, the frozen circuit is written to `<prefix>.circuit`
and referenced from the manifest, so evaluation and prediction can
rebuild the exact preprocessing.
"""

from __future__ import annotations

import os

import numpy as np

from .exceptions import FileFormatError
from .fileio import tensor_from_bytes, tensor_record_size, tensor_to_bytes
from .unet import AttentionUNet, AttentionUNetConfig, parameter_shapes

MANIFEST_MAGIC = "quanvseg-checkpoint 1"
_QUANV_KEYS = ("quanv.kernel", "quanv.stride", "quanv.padding", "quanv.rescale")


def save_checkpoint(prefix, model: AttentionUNet, quanv_config=None,
                    circuit_text: str | None = None):
    """Write `<prefix>.manifest` / `.tensors` (and `.circuit` if given)."""
    prefix = str(prefix)
    cfg = model.config
    lines = [
        MANIFEST_MAGIC,
        f"in_channels {cfg.in_channels}",
        f"depth {cfg.depth}",
        "widths " + ",".join(str(w) for w in cfg.widths),
        "gate_widths " + ",".join(str(w) for w in cfg.resolved_gate_widths()),
        f"upsample {cfg.upsample}",
        f"dtype {model.dtype.name}",
    ]
    if quanv_config is not None:
        if circuit_text is None:
            raise ValueError("quanv checkpoints need the serialized circuit")
        lines.append(f"quanv.kernel {quanv_config.kernel_size}")
        lines.append(f"quanv.stride {quanv_config.stride}")
        lines.append(f"quanv.padding {quanv_config.padding}")
        lines.append(f"quanv.rescale {int(quanv_config.rescale)}")
        lines.append(f"circuit {os.path.basename(prefix)}.circuit")
    blob = bytearray()
    for kind, table in (("param", model.params), ("stat", model.stats)):
        for name, arr in table.items():
            dims = ",".join(str(d) for d in arr.shape)
            lines.append(f"{kind} {name} {dims} {len(blob)}")
            blob += tensor_to_bytes(np.asarray(arr))
    with open(prefix + ".tensors", "wb") as fh:
        fh.write(bytes(blob))
    with open(prefix + ".manifest", "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    if circuit_text is not None:
        with open(prefix + ".circuit", "w", encoding="ascii") as fh:
            fh.write(circuit_text)


def load_checkpoint(prefix):
    """Returns (model, extras).

    extras is {} for plain checkpoints; for quanvoluted ones it carries
    the quanv.* settings plus "circuit": the serialized circuit text.
    """
    prefix = str(prefix)
    with open(prefix + ".manifest", encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != MANIFEST_MAGIC:
        raise FileFormatError(f"not a checkpoint manifest: {prefix}.manifest")
    header: dict[str, str] = {}
    tensor_lines = []
    for ln in lines[1:]:
        if not ln.strip():
            continue
        fields = ln.split()
        if fields[0] in ("param", "stat"):
            if len(fields) != 4:
                raise FileFormatError(f"bad tensor line in manifest: {ln!r}")
            tensor_lines.append(fields)
        elif len(fields) == 2:
            header[fields[0]] = fields[1]
        else:
            raise FileFormatError(f"bad manifest line: {ln!r}")
    try:
        config = AttentionUNetConfig(
            in_channels=int(header["in_channels"]),
            depth=int(header["depth"]),
            widths=tuple(int(v) for v in header["widths"].split(",")),
            gate_widths=tuple(int(v) for v in header["gate_widths"].split(",")),
            upsample=header["upsample"],
        )
        dtype = np.dtype(header.get("dtype", "float32"))
    except KeyError as exc:
        raise FileFormatError(f"manifest missing header {exc}") from None

    with open(prefix + ".tensors", "rb") as fh:
        blob = fh.read()
    loaded: dict[str, tuple[str, np.ndarray]] = {}
    for kind, name, dims, offset_text in tensor_lines:
        offset = int(offset_text)
        shape = tuple(int(v) for v in dims.split(","))
        size = tensor_record_size(blob[offset : offset + 22], offset)
        arr = tensor_from_bytes(blob[offset : offset + size], offset)
        if arr.shape != shape:
            raise FileFormatError(
                f"tensor {name}: manifest says {shape}, file holds {arr.shape}",
                offset=offset,
            )
        loaded[name] = (kind, arr.astype(dtype, copy=False))

    params: dict[str, np.ndarray] = {}
    stats: dict[str, np.ndarray] = {}
    for kind, name, shape in parameter_shapes(config):
        if name not in loaded:
            raise FileFormatError(f"checkpoint is missing tensor {name}")
        stored_kind, arr = loaded.pop(name)
        if stored_kind != kind or arr.shape != shape:
            raise FileFormatError(
                f"tensor {name}: expected {kind} {shape}, "
                f"found {stored_kind} {arr.shape}"
            )
        (params if kind == "param" else stats)[name] = arr
    if loaded:
        raise FileFormatError(f"checkpoint has surplus tensors: {sorted(loaded)}")

    extras: dict[str, str] = {}
    if "circuit" in header:
        for key in _QUANV_KEYS:
            if key not in header:
                raise FileFormatError(f"manifest missing header {key}")
            extras[key] = header[key]
        circuit_path = os.path.join(os.path.dirname(prefix) or ".", header["circuit"])
        with open(circuit_path, encoding="ascii") as fh:
            extras["circuit"] = fh.read()
    model = AttentionUNet(config, params, stats, dtype=dtype)
    return model, extras
