"""Build config dataclasses from plain (JSON) dicts and back."""

from dataclasses import asdict, fields, is_dataclass


def build(cls, d=None):
    """Instantiate dataclass ``cls`` from dict ``d``; nested dataclass fields recurse.

    Unknown keys raise ``ValueError`` so typos in config files do not pass silently.
    """
    d = dict(d or {})
    known = {f.name: f for f in fields(cls)}
    unknown = set(d) - set(known)
    if unknown:
        raise ValueError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    kwargs = {}
    for name, value in d.items():
        ftype = known[name].type
        if is_dataclass(ftype) and isinstance(value, dict):
            value = build(ftype, value)
        elif isinstance(value, list) and ftype is tuple:
            value = tuple(value)
        kwargs[name] = value
    return cls(**kwargs)


def to_dict(obj):
    return asdict(obj) if is_dataclass(obj) else obj
