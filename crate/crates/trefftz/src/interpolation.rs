//! H^{1/2}-based boundary interpolation and interpolation-error studies.
