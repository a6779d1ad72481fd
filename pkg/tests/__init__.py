"""Unit test package for antiholo_moduli."""
