"""
LangGraph Construction and Routing Logic
Builds the batch experiment workflow graph
"""
from typing import Iterable, List, Literal, Optional

from langgraph.graph import StateGraph, START, END

from config import WORKERS, ExperimentConfig
from metrics import RunSummary
from nodes import apply_exclusions, calibrate, plan_batch, run_cells, write_report
from predictor import LEARNING_VARIANTS
from state import BatchState, create_initial_state


# ========== ROUTING FUNCTIONS ==========

def needs_calibration(state: BatchState) -> Literal["calibrate", "run"]:
    """Router: Learning variants need normalizers before any cell runs"""
    if any(v in LEARNING_VARIANTS for v in state["variants"]):
        return "calibrate"
    return "run"


# ========== GRAPH BUILDER ==========

def build_graph():
    """Build and compile the LangGraph workflow"""

    # Create graph builder
    graph_builder = StateGraph(BatchState)

    # Add nodes
    graph_builder.add_node("plan_batch", plan_batch)
    graph_builder.add_node("calibrate", calibrate)
    graph_builder.add_node("run_cells", run_cells)
    graph_builder.add_node("apply_exclusions", apply_exclusions)
    graph_builder.add_node("write_report", write_report)

    # Add edges
    graph_builder.add_edge(START, "plan_batch")

    # Add conditional edge
    graph_builder.add_conditional_edges(
        "plan_batch",
        needs_calibration,
        {
            "calibrate": "calibrate",
            "run": "run_cells"
        }
    )

    graph_builder.add_edge("calibrate", "run_cells")
    graph_builder.add_edge("run_cells", "apply_exclusions")
    graph_builder.add_edge("apply_exclusions", "write_report")
    graph_builder.add_edge("write_report", END)

    # Compile graph
    graph = graph_builder.compile()

    return graph


# ========== ENTRY POINTS ==========

def run_batch(config: ExperimentConfig, variants: Iterable[str], gains: Iterable[str],
              n_seeds: int, out_dir: Optional[str] = None, workers: Optional[int] = None,
              first_seed: int = 1) -> BatchState:
    """Run the whole workflow and return its final state"""
    seeds = list(range(first_seed, first_seed + n_seeds))
    state = create_initial_state(config, variants, gains, seeds, out_dir,
                                 workers if workers is not None else WORKERS)
    graph = build_graph()
    return graph.invoke(state)


def batch_run(config: ExperimentConfig, variants: Iterable[str], gains: Iterable[str],
              n_seeds: int, out_dir: Optional[str] = None,
              workers: Optional[int] = None) -> List[RunSummary]:
    """Retained run summaries of a (variant x gain x seed) batch, canonically ordered"""
    return run_batch(config, variants, gains, n_seeds, out_dir, workers)["summaries"]
