pub mod bitstr;
pub mod channel;
pub mod codec;
pub mod coins;
pub mod compound;
pub mod galois;
pub mod leakage;
pub mod polar;
