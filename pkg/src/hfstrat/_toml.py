try:  # Python >= 3.11
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover
    import tomli as _toml

loads = _toml.loads
load = _toml.load
TOMLDecodeError = _toml.TOMLDecodeError
