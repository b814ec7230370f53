"""ctf-vault: a self-hostable archive platform for rehosted CTF challenges."""

__version__ = "0.1.0"
