//! Multi-device execution of mitigation plans.
//!
//! Devices are described by [`DeviceProfile`]s, either sampled from a normal
//! error distribution or loaded from calibration data. A plan can be
//! replicated (every device runs every entry, results averaged) or sharded
//! (entries spread over devices, combined once). Device runs are independent
//! and fan out over the rayon pool; every device and entry owns a keyed RNG
//! stream, so results do not depend on completion order.

mod jobs;
mod parallel;
mod profiles;

pub use jobs::{batch_jobs, Job, JobLimits, Submission};
pub use parallel::{
    additional_error, device_seed, mean_estimate, replicated_per_device, run_replicated, run_sharded,
    run_strategy, Assignment, Execution, ParallelStrategy,
};
pub use profiles::{
    convert_bracketed_table, load_device_profiles, noise_model_of, parse_bracketed, sample_normal_profiles,
    CxProperties, DeviceDataset, DeviceEnsemble, DeviceProfile, QubitProperties, SystemEntry,
    BUNDLED_DEVICES_JSON, BUNDLED_TABLE_TEXT,
};
