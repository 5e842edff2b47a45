//! Benchmarks and evaluation: the optimal online DP, offline and prophet
//! values, the upper-bound LP, random routing across resources, the
//! two-unit prophet bound and a seeded Monte Carlo harness.

mod dp;
mod montecarlo;
mod offline;
mod prophet2;
mod routing;

pub use dp::{dp_value, DpTable, DP_CAP};
pub use montecarlo::{
    monte_carlo, query_rng, simulate_routed, BestFitPolicy, DpPolicy, MagicianKnapsack,
    OnlinePolicy, SimStats,
};
pub use offline::{
    offline_value, offline_value_multi, prophet_value, up_value, up_value_greedy, ProphetEstimate,
    EXACT_ENUM_CAP,
};
pub use prophet2::{
    prophet2_bound, prophet2_g, prophet2_g_bernoulli, Prophet2Grid, Prophet2Result,
};
pub use routing::{route, Routing};
