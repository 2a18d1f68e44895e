//! Policy learning on doubly-robust scores: policy values, exact
//! depth-bounded policy trees, cross-validated policy comparisons and
//! reallocation welfare arithmetic.

mod data;
mod tree;
mod validate;
mod value;
mod welfare;

pub use data::PolicyData;
pub use tree::{fit_policy_tree, PolicyNode, PolicyTree, TreeOptions, DEFAULT_MAX_EVALUATIONS};
pub use validate::{baseline_test, validate_policy, Baseline, BaselineTest, PolicyValidation};
pub use value::{cost_table_default, policy_value, PolicyEvaluation};
pub use welfare::{reallocation_welfare, ReallocationInputs, SpilloverTable, WelfareBreakdown};
