# memory/analysis.py
import numpy as np


def index_stats(memory):
    """ボクセルインデックスの占有状況（セル数、セルあたり id 数の平均/最大）"""
    index = memory.index
    if index is None or not index.cells:
        return {"cells": 0, "avg_ids_per_cell": 0.0, "max_ids_per_cell": 0,
                "patches": len(memory), "voxel_size": memory.voxel_size}
    counts = np.array([len(ids) for ids in index.cells.values()])
    return {
        "cells": int(len(counts)),
        "avg_ids_per_cell": float(counts.mean()),
        "max_ids_per_cell": int(counts.max()),
        "patches": len(memory),
        "voxel_size": memory.voxel_size,
    }
