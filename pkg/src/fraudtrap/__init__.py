from fraudtrap._backend import BACKEND
