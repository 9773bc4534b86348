import os
import sys

# Ensure we can import from src
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.core.paths import get_output_path
from src.services.rng import SlotRng
from src.ui.report_writer import render_uniform_rows, write_atomic

SEED = 1
SLOTS = 16

def dump_reference(seed=SEED, slots=SLOTS, output_dir=None):
    """
    Writes the first uniforms of a seeded stream so other platforms can compare.

    The output for seed 1 matches tests/data/rng_reference_seed1.csv.
    """
    rng = SlotRng(seed)
    rows = [rng.next_slot() for _ in range(slots)]
    path = get_output_path(f"rng_reference_seed{seed}.csv", output_dir)
    write_atomic(path, render_uniform_rows(rows))
    print(f"Wrote {slots} slots of seed {seed} to {path}")

if __name__ == "__main__":
    dump_reference(output_dir=sys.argv[1] if len(sys.argv) > 1 else None)
