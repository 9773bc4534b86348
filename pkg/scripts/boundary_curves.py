import os
import sys

# Ensure we can import from src
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.core.model import SystemParams
from src.core.paths import get_output_path
from src.services.region_service import RegionSelector, boundary_trace, optimal_pa_table
from src.ui.report_writer import render_boundary_trace, write_atomic

# Numerical illustration parameter set
PARAMS = SystemParams.from_values(p13=0.5, p12=0.9, p23=0.8, q1=0.2, q2=0.3)
RESOLUTION = 200

TRACES = {
    "boundary_no_cooperation.csv": RegionSelector.fixed(0.0),
    "boundary_full_cooperation.csv": RegionSelector.fixed(1.0),
    "boundary_partial_cooperation.csv": RegionSelector.closure(),
}

def write_traces(output_dir=None):
    for file_name, selector in TRACES.items():
        path = get_output_path(file_name, output_dir)
        print(f"Tracing {selector.label} boundary to {path}...")
        trace = boundary_trace(PARAMS, selector, RESOLUTION)
        write_atomic(path, render_boundary_trace(trace))
        end = trace.points[-1]
        print(f"  lambda2=0 intercept: {end.lambda1:.9f}")

def print_optimal_pa_table():
    table = optimal_pa_table(PARAMS)
    print(f"Optimal acceptance probability ({table.case.r1_case.value}/{table.case.r2_case.value}):")
    for condition, value in table.rows():
        print(f"  {condition:<50} pa* = {value}")

if __name__ == "__main__":
    write_traces(sys.argv[1] if len(sys.argv) > 1 else None)
    print_optimal_pa_table()
    print("Done.")
