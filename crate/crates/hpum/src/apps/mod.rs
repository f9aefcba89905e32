//! End-to-end application kernels mapped onto the simulated chip: AES-128
//! encryption, a tiny CNN, and a tiny transformer encoder layer.

pub mod aes;
pub mod cnn;
pub mod engine;
pub mod llm;
