"""Wave-packet simulation of momentum-kick enhanced transmission over steep potentials."""

__version__ = "0.1.0"
