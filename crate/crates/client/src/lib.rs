//! Client for the tile service: blocking calls, background calls with
//! polling or completion callbacks, and the `terra` command line.
//!
//! ```no_run
//! use terra_client::{Client, ServiceEndpoint};
//! use terra_core::gazetteer::Place;
//!
//! let client = Client::new(ServiceEndpoint::new("http://127.0.0.1:8080"))?;
//! let places = client.get_place_facts(Place::new("San Francisco", "California", ""))?;
//! let pending = client.begin_get_place_facts(Place::new("Oakland", "", ""));
//! let oakland = pending.wait()?;
//! # Ok::<(), terra_client::ClientError>(())
//! ```

pub mod cli;
pub mod client;
pub mod error;
pub mod pending;

pub use client::{Client, ImageAreaRequest, RawResponse, RetryPolicy, ServiceEndpoint, TileBytes};
pub use error::{ClientError, ErrorCode, Result, ServiceError};
pub use pending::{CallId, CallState, PendingCall};
