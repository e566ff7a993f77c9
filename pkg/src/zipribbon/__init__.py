"""zipribbon: mesh + cylinder decomposition -> one zippable developable ribbon."""

__version__ = "0.1.0"
