"""Common utilities and shared code"""
