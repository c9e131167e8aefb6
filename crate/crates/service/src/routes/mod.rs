pub(crate) mod dialog;
pub(crate) mod patients;
pub(crate) mod vitals;
