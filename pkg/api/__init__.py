"""FastAPI backend for fsccert."""
