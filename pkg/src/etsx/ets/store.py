"""Line-delimited JSON persistence for ETS stores.

The first line is a header object; every following line holds one summary.
Keys are written in a fixed order so files are byte-stable.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..ir.text import parse_condition
from .model import (
    ETS, EtsStore, ExternalVar, KeyAPI, KeyCond, KeyVar, MessagePattern, Sink, VarRef,
)

FORMAT = "ets-store"
FORMAT_VERSION = 1


class StoreError(ValueError):
    pass


def ets_to_json(e: ETS) -> dict:
    return {
        "sink": {"method": e.sink.method, "stmt": e.sink.stmt, "var": e.sink.var, "kind": e.sink.kind},
        "signaler": e.signaler,
        "type": e.type,
        "message": e.message.to_json(),
        "keyConds": [{"cond": str(k.cond), "tag": k.tag, "at": k.at} for k in e.key_conds],
        "keyCondVars": [{"name": v.name, "at": v.at} for v in e.key_cond_vars],
        "keyVars": [{"mtd": k.mtd, "loc": k.loc, "kcv": k.kcv} for k in e.key_vars],
        "keyAPIs": [{"mtd": a.mtd, "keyField": a.key_field, "kcv": a.kcv, "dpt": a.dpt,
                     "storer": a.storer} for a in e.key_apis],
        "externalVars": [{"kind": x.kind, "owner": x.owner, "loc": x.loc, "field": x.field_name,
                          "kcv": x.kcv} for x in e.external_vars],
        "flags": list(e.flags),
        "version": e.version,
    }


def ets_from_json(d: dict) -> ETS:
    s = d["sink"]
    return ETS(
        sink=Sink(s["method"], s["stmt"], s.get("var"), s.get("kind", "throw")),
        signaler=d["signaler"],
        type=d["type"],
        message=MessagePattern.from_json(d["message"]),
        key_conds=tuple(KeyCond(parse_condition(k["cond"]), k["tag"], k["at"]) for k in d["keyConds"]),
        key_cond_vars=tuple(VarRef(v["name"], v["at"]) for v in d["keyCondVars"]),
        key_vars=tuple(KeyVar(k["mtd"], k["loc"], k["kcv"]) for k in d["keyVars"]),
        key_apis=tuple(KeyAPI(a["mtd"], a["keyField"], a["kcv"], a["dpt"], a["storer"])
                       for a in d["keyAPIs"]),
        external_vars=tuple(ExternalVar(x["kind"], x["owner"], x["loc"], x["field"], x["kcv"])
                            for x in d.get("externalVars", ())),
        flags=tuple(d.get("flags", ())),
        version=d.get("version"),
    )


def dumps_store(store: EtsStore) -> str:
    header = {"format": FORMAT, "version": FORMAT_VERSION,
              "framework_version": store.framework_version, "count": len(store.entries)}
    lines = [json.dumps(header, ensure_ascii=False)]
    lines += [json.dumps(ets_to_json(e), ensure_ascii=False) for e in store.entries]
    return "\n".join(lines) + "\n"


def loads_store(text: str) -> EtsStore:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise StoreError("empty store")
    header = json.loads(lines[0])
    if header.get("format") != FORMAT:
        raise StoreError("not an ets-store file")
    if header.get("version") != FORMAT_VERSION:
        raise StoreError(f"unsupported store version {header.get('version')!r}")
    entries = [ets_from_json(json.loads(ln)) for ln in lines[1:]]
    return EtsStore(entries, header.get("framework_version"))


def save_store(store: EtsStore, path) -> None:
    Path(path).write_text(dumps_store(store), encoding="utf-8")


def load_store(path) -> EtsStore:
    return loads_store(Path(path).read_text(encoding="utf-8"))


def load_stores(directory) -> list[EtsStore]:
    """Every `*.jsonl` store in `directory`, sorted by file name."""
    return [load_store(p) for p in sorted(Path(directory).glob("*.jsonl"))]
