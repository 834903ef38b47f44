//! Benchmarks, losses, theoretical thresholds and edge-set constructions.

mod edge_sets;
mod loss;

pub use edge_sets::{
    acceptable_edges, interview_edges, reservation_edges, selected_edges, threshold_edges, truncated_edges,
    truncation_threshold, viable_edges, AcceptableParams, AcceptanceLevels, InterviewParams, SelectedSetParams,
};
pub use loss::{
    benchmark, cone_bounds, loss_report, lower_bound_l, theoretical_l, AgentLoss, LossParams, LossReport, LossValue,
};
