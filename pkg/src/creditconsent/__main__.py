from creditconsent.cli import main

main()
