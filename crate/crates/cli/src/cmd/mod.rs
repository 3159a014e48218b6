pub mod filter;
pub mod gradcheck;
pub mod probe;
pub mod pseudolabel;
pub mod train_toy;
