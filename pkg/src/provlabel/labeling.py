"""Data labels: root paths of the anchor nodes of an item's two ports.

A port is anchored at the tree node of the module instance it was first
created on; later re-attachments (when that instance is expanded) never move
the anchor, so a label depends only on the tree as it was when the item
appeared.

Wire format (all integers are unsigned base-128 varints)::

    header = has_src | has_dst << 1 | len(prefix) << 2
    [len(src_suffix), src_index]     if has_src
    [len(dst_suffix), dst_index]     if has_dst
    prefix edge labels, src suffix edge labels, dst suffix edge labels

An edge label ``(k, i)`` is written ``k << 1, i`` and ``(s, t, i)`` is
written ``s << 1 | 1, t, i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator

from .run import DataItem, RunState, Step

EdgeLabel = tuple[int, ...]
Path_ = tuple[EdgeLabel, ...]


class LabelDecodeError(ValueError):
    pass


@dataclass(frozen=True)
class PortLabel:
    path: Path_
    side: str
    index: int


@dataclass(frozen=True)
class DataLabel:
    prefix: Path_
    src_suffix: Path_ | None
    src_index: int | None
    dst_suffix: Path_ | None
    dst_index: int | None

    @property
    def has_src(self) -> bool:
        return self.src_index is not None

    @property
    def has_dst(self) -> bool:
        return self.dst_index is not None

    @property
    def src_path(self) -> Path_ | None:
        return None if self.src_suffix is None else self.prefix + self.src_suffix

    @property
    def dst_path(self) -> Path_ | None:
        return None if self.dst_suffix is None else self.prefix + self.dst_suffix

    def output_port(self) -> PortLabel | None:
        return None if self.src_index is None else PortLabel(self.src_path, "out", self.src_index)

    def input_port(self) -> PortLabel | None:
        return None if self.dst_index is None else PortLabel(self.dst_path, "in", self.dst_index)

    def bit_length(self) -> int:
        return 8 * len(encode_label(self))

    def to_json(self) -> dict:
        out: dict = {"prefix": [list(e) for e in self.prefix]}
        if self.has_src:
            out["src"] = {"suffix": [list(e) for e in self.src_suffix], "index": self.src_index}
        if self.has_dst:
            out["dst"] = {"suffix": [list(e) for e in self.dst_suffix], "index": self.dst_index}
        return out


def common_prefix_length(a: Path_, b: Path_) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def make_label(src: PortLabel | None, dst: PortLabel | None) -> DataLabel:
    if src is None and dst is None:
        raise ValueError("a data label needs at least one port")
    if src is None:
        return DataLabel((), None, None, dst.path, dst.index)
    if dst is None:
        return DataLabel((), src.path, src.index, None, None)
    n = common_prefix_length(src.path, dst.path)
    return DataLabel(src.path[:n], src.path[n:], src.index, dst.path[n:], dst.index)


def label_item(run: RunState, item: DataItem) -> DataLabel:
    """Label of ``item`` from its anchors.  Items on the start module's
    boundary keep an empty path."""
    nodes = run.nodes
    src = dst = None
    if item.src_hist is not None:
        node, port = item.src_hist[0]
        src = PortLabel(() if item.step == 0 else nodes[node].path, "out", port)
    if item.dst_hist is not None:
        node, port = item.dst_hist[0]
        dst = PortLabel(() if item.step == 0 else nodes[node].path, "in", port)
    return make_label(src, dst)


def label_new_items(run: RunState, items: Iterable[DataItem]) -> list[DataLabel]:
    """Assign labels to freshly created items; existing labels are never touched."""
    out = []
    for it in items:
        if it.label is None:
            it.label = label_item(run, it)
        out.append(it.label)
    return out


class LabeledRun:
    """A :class:`RunState` whose items are labeled as soon as they appear."""

    def __init__(self, run: RunState):
        self.run = run
        label_new_items(run, run.items)

    def apply(self, target: str, k: int) -> list[DataItem]:
        new = self.run.apply(target, k)
        label_new_items(self.run, new)
        return new

    def apply_auto(self, k: int) -> list[DataItem]:
        new = self.run.apply_auto(k)
        label_new_items(self.run, new)
        return new

    def labels(self) -> dict[int, DataLabel]:
        return {it.id: it.label for it in self.run.items}


def label_run(run: RunState) -> dict[int, DataLabel]:
    return LabeledRun(run).labels()


def derive_labeled(g, cycles, steps: Iterable[Step]) -> LabeledRun:
    from .run import start_run

    lr = LabeledRun(start_run(g, cycles))
    for st in steps:
        lr.apply(st.target, st.production)
    return lr


# codec ------------------------------------------------------------------------


def _varint(n: int, out: bytearray) -> None:
    if n < 0:
        raise ValueError("varints are unsigned")
    while n >= 0x80:
        out.append((n & 0x7F) | 0x80)
        n >>= 7
    out.append(n)


class _Reader:
    __slots__ = ("data", "pos")

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def varint(self) -> int:
        n = shift = 0
        data = self.data
        while True:
            if self.pos >= len(data):
                raise LabelDecodeError("truncated varint")
            b = data[self.pos]
            self.pos += 1
            n |= (b & 0x7F) << shift
            if not b & 0x80:
                return n
            shift += 7
            if shift > 63:
                raise LabelDecodeError("varint too long")

    def edge(self) -> EdgeLabel:
        head = self.varint()
        if head & 1:
            return (head >> 1, self.varint(), self.varint())
        return (head >> 1, self.varint())


def _write_edge(e: EdgeLabel, out: bytearray) -> None:
    if len(e) == 2:
        _varint(e[0] << 1, out)
        _varint(e[1], out)
    else:
        _varint(e[0] << 1 | 1, out)
        _varint(e[1], out)
        _varint(e[2], out)


def encode_label(dl: DataLabel) -> bytes:
    out = bytearray()
    _varint(int(dl.has_src) | int(dl.has_dst) << 1 | len(dl.prefix) << 2, out)
    if dl.has_src:
        _varint(len(dl.src_suffix), out)
        _varint(dl.src_index, out)
    if dl.has_dst:
        _varint(len(dl.dst_suffix), out)
        _varint(dl.dst_index, out)
    for e in dl.prefix:
        _write_edge(e, out)
    for e in dl.src_suffix or ():
        _write_edge(e, out)
    for e in dl.dst_suffix or ():
        _write_edge(e, out)
    return bytes(out)


def decode_label(data: bytes) -> DataLabel:
    r = _Reader(data)
    head = r.varint()
    has_src, has_dst = bool(head & 1), bool(head & 2)
    if not (has_src or has_dst):
        raise LabelDecodeError("label has neither port")
    n_prefix = head >> 2
    n_src = src_index = n_dst = dst_index = None
    if has_src:
        n_src, src_index = r.varint(), r.varint()
    if has_dst:
        n_dst, dst_index = r.varint(), r.varint()
    prefix = tuple(r.edge() for _ in range(n_prefix))
    src = tuple(r.edge() for _ in range(n_src)) if has_src else None
    dst = tuple(r.edge() for _ in range(n_dst)) if has_dst else None
    if r.pos != len(data):
        raise LabelDecodeError("trailing bytes after label")
    return DataLabel(prefix, src, src_index, dst, dst_index)


# label store --------------------------------------------------------------------

_MAGIC = b"PLBL\x01"


def write_label_store(fh: BinaryIO, labels: Iterable[tuple[int, DataLabel]]) -> None:
    fh.write(_MAGIC)
    for item_id, dl in labels:
        body = encode_label(dl)
        head = bytearray()
        _varint(item_id, head)
        _varint(len(body), head)
        fh.write(bytes(head) + body)


def read_label_store(fh: BinaryIO) -> Iterator[tuple[int, DataLabel]]:
    data = fh.read()
    if not data.startswith(_MAGIC):
        raise LabelDecodeError("not a label store")
    r = _Reader(data)
    r.pos = len(_MAGIC)
    while r.pos < len(data):
        item_id = r.varint()
        size = r.varint()
        end = r.pos + size
        if end > len(data):
            raise LabelDecodeError("truncated label record")
        yield item_id, decode_label(data[r.pos : end])
        r.pos = end


def save_labels(path: str | Path, labels: dict[int, DataLabel]) -> None:
    with open(path, "wb") as fh:
        write_label_store(fh, sorted(labels.items()))


def load_labels(path: str | Path) -> dict[int, DataLabel]:
    with open(path, "rb") as fh:
        return dict(read_label_store(fh))
