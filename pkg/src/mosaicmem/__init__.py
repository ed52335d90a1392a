"""
mosaicmem: 3D パッチメモリによるカメラ制御付き動画生成の幾何・メモリ層。
CLI は `python -m mosaicmem`。
"""
__version__ = "0.1.0"
