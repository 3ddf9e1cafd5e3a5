from .run_config import RunConfigParseError, load_run_config, parse_run_config

__all__ = ["RunConfigParseError", "load_run_config", "parse_run_config"]
