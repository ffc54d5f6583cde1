"""Allow ``python -m adsb_ul``."""

from .cli import entrypoint

entrypoint()
