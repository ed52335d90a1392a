from .edit import Selection, transform_patch, delete, duplicate, relocate, stitch, copy_ids

__all__ = ["Selection", "transform_patch", "delete", "duplicate", "relocate", "stitch", "copy_ids"]
