from .tensorfile import TensorFormatError, encode_tensor, decode_tensor, read_tensor, write_tensor
from .ppm import read_ppm, write_ppm, to_uint8

__all__ = [
    "TensorFormatError",
    "encode_tensor",
    "decode_tensor",
    "read_tensor",
    "write_tensor",
    "read_ppm",
    "write_ppm",
    "to_uint8",
]
