//! Device capability records and launch sizing.

use alloc::string::String;

/// Workgroup size requested by default; many devices (notably AMD) cap at 256.
pub const DEFAULT_WORKGROUP_SIZE: usize = 256;

/// Capabilities of an execution backend that shape kernel launches.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BackendDescriptor {
    pub name: String,
    pub max_workgroup_size: usize,
    pub local_mem_bytes: usize,
    pub is_device: bool,
}

impl BackendDescriptor {
    /// The host reference backend, with simulated device limits.
    pub fn reference() -> Self {
        Self {
            name: "reference".into(),
            max_workgroup_size: 256,
            local_mem_bytes: 32768,
            is_device: false,
        }
    }

    /// Largest supported reduction workgroup (power of two in 32..=256).
    pub fn reduce_workgroup(&self) -> usize {
        let cap = self.max_workgroup_size.min(DEFAULT_WORKGROUP_SIZE);
        crate::codegen::REDUCE_WORKGROUP_SIZES
            .iter()
            .rev()
            .copied()
            .find(|&wg| wg <= cap && wg * 4 <= self.local_mem_bytes)
            .unwrap_or(32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaunchConfig {
    pub global_size: usize,
    pub workgroup_size: usize,
}

impl LaunchConfig {
    pub fn groups(&self) -> usize {
        self.global_size / self.workgroup_size
    }
}

/// One-dimensional launch covering `n` work items on `device`.
pub fn choose_launch(n: usize, device: &BackendDescriptor) -> LaunchConfig {
    let workgroup_size = DEFAULT_WORKGROUP_SIZE.min(device.max_workgroup_size).max(1);
    LaunchConfig {
        global_size: n.div_ceil(workgroup_size) * workgroup_size,
        workgroup_size,
    }
}
