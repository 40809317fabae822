""" Tests for efcml """
