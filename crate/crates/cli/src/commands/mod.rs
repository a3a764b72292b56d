pub mod exterior;
pub mod fowler;
pub mod glue;
pub mod interior;
pub mod linop;
pub mod modes;
pub mod verify;
