use std::ops::{Deref, DerefMut};

use nalgebra::DVector;

macro_rules! vector_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(pub DVector<f64>);

        impl $name {
            pub fn zeros(len: usize) -> Self {
                Self(DVector::zeros(len))
            }

            pub fn from_slice(values: &[f64]) -> Self {
                Self(DVector::from_column_slice(values))
            }

            pub fn into_inner(self) -> DVector<f64> {
                self.0
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|v| v.is_finite())
            }
        }

        impl Deref for $name {
            type Target = DVector<f64>;
            fn deref(&self) -> &DVector<f64> {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut DVector<f64> {
                &mut self.0
            }
        }

        impl From<DVector<f64>> for $name {
            fn from(v: DVector<f64>) -> Self {
                Self(v)
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                Self(DVector::from_vec(v))
            }
        }
    };
}

vector_newtype!(
    /// Joint-space quantity in radians (angles, corrections), one entry per joint.
    JointVector
);

vector_newtype!(
    /// Muscle-space quantity, one entry per muscle. Lengths and length
    /// corrections are in meters, tensions in kgf.
    MuscleVector
);
