"""Seeded pseudo-random task pool and runtime allocation.

Every task is a (shelf cell, drop-station id) pair.  Drawing a task samples
a uniform index into the remaining pool and removes it, so draining a pool
yields a permutation of its initial contents.  All randomness comes from a
single seeded stream owned by the world, keeping trials replayable.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Optional

from .rng import Pcg32

if TYPE_CHECKING:
    from .world import Task, WarehouseConfig


class PoolExhausted(Exception):
    """Raised when an initial allocation asks for more tasks than remain."""


class TaskPool:
    __slots__ = ("tasks", "rng")

    def __init__(self, tasks: list, rng: Pcg32):
        self.tasks = tasks
        self.rng = rng

    def __len__(self) -> int:
        return len(self.tasks)

    @classmethod
    def build(cls, config: "WarehouseConfig", rng: Pcg32) -> "TaskPool":
        """One task per box: n_robots * boxes_per_robot uniform draws.

        Consumes two rng values per task (shelf index, station index).
        """
        from .world import Task
        shelves = config.shelf_cells
        station_ids = config.station_ids()
        size = config.n_robots * config.boxes_per_robot
        tasks = []
        for _ in range(size):
            shelf = shelves[rng.below(len(shelves))]
            sid = station_ids[rng.below(len(station_ids))]
            tasks.append(Task(shelf, sid))
        return cls(tasks, rng)

    @classmethod
    def from_tasks(cls, tasks: list, rng: Pcg32) -> "TaskPool":
        return cls(list(tasks), rng)

    def draw(self) -> Optional["Task"]:
        if not self.tasks:
            return None
        idx = self.rng.below(len(self.tasks))
        return self.tasks.pop(idx)


def allocate_initial(pool: TaskPool, n: int) -> list:
    """Initial assignment: one uniform draw-and-remove per robot."""
    if len(pool) < n:
        raise PoolExhausted(f"pool has {len(pool)} tasks, need {n}")
    return [pool.draw() for _ in range(n)]


def next_task(pool: TaskPool) -> Optional["Task"]:
    """Draw the next task, or None when the pool is empty (a normal outcome:
    the robot heads home)."""
    return pool.draw()
