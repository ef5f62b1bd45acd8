//! Workspace member hosting the criterion benchmark targets.
