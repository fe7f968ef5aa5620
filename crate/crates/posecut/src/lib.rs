pub mod am;
pub mod bnb;
pub mod bounds;
pub mod color;
pub mod color_model;
pub mod energy;
pub mod features;
pub mod geometry;
pub mod hull;
pub mod interval;
pub mod learn;
pub mod metrics;
pub mod mincut;
pub mod superpixels;
pub mod synth;
pub mod wireframe;
