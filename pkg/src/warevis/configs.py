"""Built-in warehouse scenarios at three scales.

"mini" is the 6-robot / 18-shelf floor, "large" the 15-robot / 225-shelf
floor, and "main" (the default) sits between them with 12 robots, 36
shelves, and 4 drop stations.  Layouts are horizontal shelf racks in the
middle of the floor, stations along the south wall, and robot homes along
the north side.
"""

from __future__ import annotations

from .world import WarehouseConfig


def _rack_rows(rows: list[int], col_start: int, col_end: int) -> tuple[tuple[int, int], ...]:
    return tuple((c, r) for r in rows for c in range(col_start, col_end + 1))


def mini_config(rng_seed: int = 0) -> WarehouseConfig:
    """15 m x 12 m floor, 18 shelves, 6 robots, 3 drop stations."""
    return WarehouseConfig(
        width=15.0,
        height=12.0,
        shelf_cells=_rack_rows([8, 12, 16], 8, 13),
        drop_stations=((0, (5, 3)), (1, (15, 3)), (2, (24, 3))),
        n_robots=6,
        home_cells=tuple((c, 20) for c in (5, 8, 11, 14, 17, 20)),
        worker_start_cell=(15, 6),
        rng_seed=rng_seed,
    )


def main_config(rng_seed: int = 0) -> WarehouseConfig:
    """40 m x 30 m floor, 36 shelves, 12 robots, 4 drop stations."""
    return WarehouseConfig(
        width=40.0,
        height=30.0,
        shelf_cells=_rack_rows([16, 26, 36, 46], 20, 28),
        drop_stations=((0, (10, 5)), (1, (30, 5)), (2, (50, 5)), (3, (70, 5))),
        n_robots=12,
        home_cells=tuple((c, 54) for c in range(10, 70, 5)),
        worker_start_cell=(40, 10),
        rng_seed=rng_seed,
    )


def large_config(rng_seed: int = 0) -> WarehouseConfig:
    """60 m x 45 m floor, 225 shelves, 15 robots, 6 drop stations."""
    return WarehouseConfig(
        width=60.0,
        height=45.0,
        shelf_cells=_rack_rows([20, 27, 34, 41, 48, 55, 62, 69, 76], 40, 64),
        drop_stations=tuple((i, (c, 6)) for i, c in enumerate((15, 35, 55, 75, 95, 110))),
        n_robots=15,
        home_cells=tuple((c, 83) for c in range(15, 105, 6)),
        worker_start_cell=(60, 12),
        rng_seed=rng_seed,
    )


BUILTIN_CONFIGS = {
    "mini": mini_config,
    "main": main_config,
    "large": large_config,
}


def builtin_config(name: str, rng_seed: int = 0) -> WarehouseConfig:
    try:
        return BUILTIN_CONFIGS[name](rng_seed)
    except KeyError:
        raise ValueError(f"unknown builtin config {name!r}; "
                         f"choices: {sorted(BUILTIN_CONFIGS)}") from None
