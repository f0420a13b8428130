# History-dependent variational-hemivariational solver with a viscoelastic contact model
__version__ = "0.1.0"
